//! Finite-horizon stochastic dynamic programming for a standalone microgrid
//! made of a solar installation, a battery and a generator with a finite fuel
//! tank.
//!
//! Residual demand follows a seasonal Ornstein-Uhlenbeck process. One-step
//! conditional laws of (demand deviation, state of charge, fuel level) are
//! Gaussian with closed-form moments; they are discretized on a state grid
//! and the resulting Markov decision process is solved by backward recursion.

pub mod calibration;
pub mod constraints;
pub mod cost;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod math;
pub mod model;
pub mod simulator;
pub mod solver;

pub use error::{Error, Result};
pub use model::{Action, ModelConfig, State};
