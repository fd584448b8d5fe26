//! Exact one-step conditional laws of (Z, Q, G) given the state and action.
//!
//! Over a step the seasonal mean and the battery efficiency are frozen at
//! their values at the left endpoint. Z is an OU process, Q solves a linear
//! ODE driven by Z, and G integrates Z; conditional on the current state the
//! next triple is Gaussian. At most one of Q, G is random for any action.

use serde::{Deserialize, Serialize};

use crate::math::{decay_integral, expm1_ratio, ou_integral_kernel};
use crate::model::{Action, ModelConfig, State};

/// Conditional means, variances and cross moments one step ahead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionMoments {
    pub mean_z: f64,
    pub var_z: f64,
    pub mean_q: f64,
    pub var_q: f64,
    pub mean_g: f64,
    pub var_g: f64,
    pub cov_zq: f64,
    pub rho_q: f64,
    pub cov_zg: f64,
    pub rho_g: f64,
}

/// Independent standard normal innovations driving one transition.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseVector {
    pub eps_z: f64,
    pub eps_q: f64,
    pub eps_g: f64,
}

/// Covariances and correlations of the controlled axes with Z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossMoments {
    pub cov_zq: f64,
    pub rho_q: f64,
    pub cov_zg: f64,
    pub rho_g: f64,
}

/// Conditional mean and variance of Z one step ahead.
pub fn z_moments(_n: usize, z: f64, cfg: &ModelConfig) -> (f64, f64) {
    let dt = cfg.step_length();
    let beta = cfg.demand.beta;
    let mean = z * (-beta * dt).exp();
    let var = cfg.demand.stationary_variance() * -(-2.0 * beta * dt).exp_m1();
    (mean, var)
}

/// Battery efficiency factor applied to the energy flow: the charging
/// efficiency under surplus (r <= 0), the reciprocal discharging efficiency
/// otherwise.
pub fn efficiency(t: f64, z: f64, q: f64, cfg: &ModelConfig) -> f64 {
    let q = q.clamp(0.0, 1.0);
    if cfg.demand.seasonality(t) + z <= 0.0 {
        cfg.battery.charge_efficiency(q)
    } else {
        1.0 / cfg.battery.discharge_efficiency(q)
    }
}

/// Integrated energy flow over the step, discounted by self-discharge.
fn battery_flow(n: usize, z: f64, a: Action, cfg: &ModelConfig) -> f64 {
    let dt = cfg.step_length();
    let eta0 = cfg.battery.eta0;
    let beta = cfg.demand.beta;
    match a {
        Action::Charge | Action::DischargeFull => {
            let mu = cfg.seasonal_mean(n);
            z * (-eta0 * dt).exp() * dt * expm1_ratio((eta0 - beta) * dt)
                + mu * decay_integral(eta0, dt)
        }
        Action::DischargeLimited => cfg.battery.limited_power * decay_integral(eta0, dt),
        _ => 0.0,
    }
}

/// Derivative of `decay_integral` in the rate.
fn decay_integral_rate_derivative(a: f64, dt: f64) -> f64 {
    let x = a * dt;
    if x.abs() < 1e-4 {
        dt * dt * (-0.5 + x / 3.0 - x * x / 8.0)
    } else {
        (dt * (-x).exp() * a - (-(-x).exp_m1())) / (a * a)
    }
}

/// Double integral giving the variance of the noise-driven part of Q, per
/// unit of (efficiency * sigma / capacity)^2 / (2 beta).
fn battery_noise_integral(cfg: &ModelConfig) -> f64 {
    let dt = cfg.step_length();
    let eta0 = cfg.battery.eta0;
    let beta = cfg.demand.beta;
    let gap = beta - eta0;
    let diag = if (gap * dt).abs() > 1e-6 {
        2.0 * (decay_integral(2.0 * eta0, dt) - decay_integral(eta0 + beta, dt)) / gap
    } else {
        -2.0 * decay_integral_rate_derivative(2.0 * eta0, dt)
    };
    let cross = (-beta * dt).exp() * dt * expm1_ratio(gap * dt);
    diag - cross * cross
}

/// Conditional mean and variance of the state of charge one step ahead.
pub fn q_moments(n: usize, z: f64, q: f64, a: Action, cfg: &ModelConfig) -> (f64, f64) {
    let dt = cfg.step_length();
    let decay = (-cfg.battery.eta0 * dt).exp();
    let cap = cfg.battery.capacity;
    match a {
        Action::Charge | Action::DischargeFull | Action::DischargeLimited => {
            let eff = efficiency(cfg.time(n), z, q, cfg);
            let mean = q * decay - eff / cap * battery_flow(n, z, a, cfg);
            let var = if a == Action::DischargeLimited {
                0.0
            } else {
                let s = eff * cfg.demand.sigma / cap;
                s * s / (2.0 * cfg.demand.beta) * battery_noise_integral(cfg)
            };
            (mean, var)
        }
        _ => (q * decay, 0.0),
    }
}

/// Conditional mean and variance of the fuel level one step ahead.
pub fn g_moments(n: usize, z: f64, g: f64, a: Action, cfg: &ModelConfig) -> (f64, f64) {
    let dt = cfg.step_length();
    let gen = &cfg.generator;
    let beta = cfg.demand.beta;
    match a {
        Action::FuelFull => {
            let mu = cfg.seasonal_mean(n);
            let mean = g
                - gen.idle_rate / gen.capacity * dt
                - gen.load_rate / gen.capacity * (mu * dt + z * decay_integral(beta, dt));
            let s = gen.load_rate * cfg.demand.sigma / gen.capacity;
            let var = s * s / (2.0 * beta.powi(3)) * ou_integral_kernel(beta * dt);
            (mean, var)
        }
        Action::FuelLimited => {
            let mean = g - (gen.idle_rate + gen.load_rate * gen.limited_power) * dt / gen.capacity;
            (mean, 0.0)
        }
        _ => (g, 0.0),
    }
}

fn correlation(cov: f64, var_a: f64, var_b: f64) -> f64 {
    if var_a <= 0.0 || var_b <= 0.0 {
        0.0
    } else {
        (cov / (var_a.sqrt() * var_b.sqrt())).clamp(-1.0, 1.0)
    }
}

/// Covariances and correlations of Q and G with Z one step ahead.
///
/// The battery covariance scales with the efficiency frozen at the current
/// state, so the state is needed in addition to the step and action.
pub fn cross_moments(n: usize, x: &State, a: Action, cfg: &ModelConfig) -> CrossMoments {
    let dt = cfg.step_length();
    let beta = cfg.demand.beta;
    let sigma2 = cfg.demand.sigma * cfg.demand.sigma;
    let eta0 = cfg.battery.eta0;
    let (_, var_z) = z_moments(n, x.z, cfg);

    let (cov_zq, var_q) = match a {
        Action::Charge | Action::DischargeFull => {
            let eff = efficiency(cfg.time(n), x.z, x.q, cfg);
            let bracket = decay_integral(eta0 + beta, dt)
                - (-(eta0 + beta) * dt).exp() * dt * expm1_ratio((eta0 - beta) * dt);
            let cov = -eff * sigma2 / (2.0 * beta * cfg.battery.capacity) * bracket;
            (cov, q_moments(n, x.z, x.q, a, cfg).1)
        }
        _ => (0.0, 0.0),
    };
    let (cov_zg, var_g) = match a {
        Action::FuelFull => {
            let gen = &cfg.generator;
            let decayed = -(-beta * dt).exp_m1();
            let cov = -gen.load_rate * sigma2 / (2.0 * gen.capacity * beta * beta) * decayed * decayed;
            (cov, g_moments(n, x.z, x.g, a, cfg).1)
        }
        _ => (0.0, 0.0),
    };
    CrossMoments {
        cov_zq,
        rho_q: correlation(cov_zq, var_z, var_q),
        cov_zg,
        rho_g: correlation(cov_zg, var_z, var_g),
    }
}

/// All ten conditional moments of the next state.
pub fn moments(n: usize, x: &State, a: Action, cfg: &ModelConfig) -> TransitionMoments {
    let (mean_z, var_z) = z_moments(n, x.z, cfg);
    let (mean_q, var_q) = q_moments(n, x.z, x.q, a, cfg);
    let (mean_g, var_g) = g_moments(n, x.z, x.g, a, cfg);
    let c = cross_moments(n, x, a, cfg);
    TransitionMoments {
        mean_z,
        var_z,
        mean_q,
        var_q,
        mean_g,
        var_g,
        cov_zq: c.cov_zq,
        rho_q: c.rho_q,
        cov_zg: c.cov_zg,
        rho_g: c.rho_g,
    }
}

/// Map a noise vector to the next state through the conditional Gaussian law.
pub fn apply_noise(m: &TransitionMoments, eps: &NoiseVector) -> State {
    let sz = m.var_z.sqrt();
    let sq = m.var_q.sqrt();
    let sg = m.var_g.sqrt();
    State {
        z: m.mean_z + sz * eps.eps_z,
        q: m.mean_q + sq * ((1.0 - m.rho_q * m.rho_q).sqrt() * eps.eps_q + m.rho_q * eps.eps_z),
        g: m.mean_g + sg * ((1.0 - m.rho_g * m.rho_g).sqrt() * eps.eps_g + m.rho_g * eps.eps_z),
    }
}

/// Next state for the given innovations. Feasibility is not checked.
pub fn transition_operator(
    n: usize,
    x: &State,
    a: Action,
    eps: &NoiseVector,
    cfg: &ModelConfig,
) -> State {
    apply_noise(&moments(n, x, a, cfg), eps)
}
