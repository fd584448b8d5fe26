//! Finite-horizon backward recursion.

use std::sync::Arc;

use rayon::prelude::*;

use crate::constraints::feasible_actions;
use crate::cost::{expected_stage_cost, terminal_cost};
use crate::error::{Error, Result};
use crate::kernel::{Kernel, TransitionRow};
use crate::model::Action;

/// Actions whose values differ by at most this are tied; canonical order decides.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// A finite-horizon decision problem on a finite state set.
pub trait Mdp: Sync {
    fn steps(&self) -> usize;
    fn num_states(&self) -> usize;
    /// Admissible actions at (n, state) in canonical order.
    fn actions(&self, n: usize, state: usize) -> Vec<Action>;
    fn stage_cost(&self, n: usize, state: usize, a: Action) -> f64;
    fn row(&self, n: usize, state: usize, a: Action) -> Result<Arc<TransitionRow>>;
    fn terminal(&self, state: usize) -> f64;
    /// Factor applied to the expected continuation value.
    fn continuation_discount(&self) -> f64;
}

/// The microgrid problem on a grid, backed by a transition kernel.
pub struct MicrogridMdp<'a> {
    kernel: &'a Kernel,
}

impl<'a> MicrogridMdp<'a> {
    pub fn new(kernel: &'a Kernel) -> Self {
        Self { kernel }
    }
}

impl Mdp for MicrogridMdp<'_> {
    fn steps(&self) -> usize {
        self.kernel.config().steps()
    }

    fn num_states(&self) -> usize {
        self.kernel.grid().num_states()
    }

    fn actions(&self, n: usize, state: usize) -> Vec<Action> {
        let x = self.kernel.grid().state(state);
        feasible_actions(n, &x, self.kernel.config()).iter().collect()
    }

    fn stage_cost(&self, n: usize, state: usize, a: Action) -> f64 {
        let x = self.kernel.grid().state(state);
        expected_stage_cost(n, &x, a, self.kernel.config()).value
    }

    fn row(&self, n: usize, state: usize, a: Action) -> Result<Arc<TransitionRow>> {
        self.kernel.row_unchecked(n, state, a)
    }

    fn terminal(&self, state: usize) -> f64 {
        terminal_cost(&self.kernel.grid().state(state), self.kernel.config())
    }

    fn continuation_discount(&self) -> f64 {
        self.kernel.config().continuation_discount()
    }
}

/// Values indexed by step (0..=N) and state.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub values: Vec<Vec<f64>>,
}

impl ValueTable {
    pub fn get(&self, n: usize, state: usize) -> f64 {
        self.values[n][state]
    }

    pub fn step(&self, n: usize) -> &[f64] {
        &self.values[n]
    }
}

/// Decisions indexed by step (0..N) and state.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    pub actions: Vec<Vec<Action>>,
}

impl PolicyTable {
    pub fn get(&self, n: usize, state: usize) -> Action {
        self.actions[n][state]
    }

    pub fn steps(&self) -> usize {
        self.actions.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub values: ValueTable,
    pub policy: PolicyTable,
}

/// Stage cost plus discounted expected continuation for every admissible action.
pub fn action_values<M: Mdp + ?Sized>(
    mdp: &M,
    n: usize,
    state: usize,
    v_next: &[f64],
) -> Result<Vec<(Action, f64)>> {
    let disc = mdp.continuation_discount();
    mdp.actions(n, state)
        .into_iter()
        .map(|a| {
            let row = mdp.row(n, state, a)?;
            Ok((a, mdp.stage_cost(n, state, a) + disc * row.expectation(v_next)))
        })
        .collect()
}

/// Minimal value and canonical-order minimizer at one state.
pub fn bellman_backup<M: Mdp + ?Sized>(
    mdp: &M,
    n: usize,
    state: usize,
    v_next: &[f64],
) -> Result<(f64, Action)> {
    let candidates = action_values(mdp, n, state, v_next)?;
    if candidates.is_empty() {
        return Err(Error::EmptyFeasibleSet { step: n, state });
    }
    let best = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::NonFinite { step: n, state });
    }
    let &(action, value) = candidates
        .iter()
        .find(|c| c.1 <= best + TIE_TOLERANCE)
        .expect("the minimum is attained");
    Ok((value, action))
}

/// Backward recursion from the terminal cost, parallel over states per step.
pub fn solve<M: Mdp + ?Sized>(mdp: &M) -> Result<Solution> {
    let steps = mdp.steps();
    let states = mdp.num_states();
    let terminal: Vec<f64> = (0..states).map(|s| mdp.terminal(s)).collect();
    if let Some(s) = terminal.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { step: steps, state: s });
    }
    let mut values = vec![Vec::new(); steps + 1];
    let mut actions = vec![Vec::new(); steps];
    values[steps] = terminal;
    for n in (0..steps).rev() {
        let v_next = &values[n + 1];
        let step: Vec<(f64, Action)> = (0..states)
            .into_par_iter()
            .map(|s| bellman_backup(mdp, n, s, v_next))
            .collect::<Result<_>>()?;
        let (v, a): (Vec<f64>, Vec<Action>) = step.into_iter().unzip();
        values[n] = v;
        actions[n] = a;
    }
    Ok(Solution {
        values: ValueTable { values },
        policy: PolicyTable { actions },
    })
}

/// Largest gap, over all steps and states, between the stored value and both
/// the re-evaluated minimum and the value of the stored action.
pub fn bellman_residual<M: Mdp + ?Sized>(mdp: &M, sol: &Solution) -> Result<f64> {
    let steps = mdp.steps();
    let mut worst = 0.0f64;
    for s in 0..mdp.num_states() {
        worst = worst.max((sol.values.get(steps, s) - mdp.terminal(s)).abs());
    }
    for n in 0..steps {
        let v_next = sol.values.step(n + 1);
        let step_worst = (0..mdp.num_states())
            .into_par_iter()
            .map(|s| {
                let candidates = action_values(mdp, n, s, v_next)?;
                let best = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
                let chosen = candidates
                    .iter()
                    .find(|c| c.0 == sol.policy.get(n, s))
                    .map(|c| c.1)
                    .ok_or(Error::Infeasible {
                        step: n,
                        state: s,
                        action: sol.policy.get(n, s),
                    })?;
                let v = sol.values.get(n, s);
                Ok((v - best).abs().max((v - chosen).abs()))
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        worst = worst.max(step_worst);
    }
    Ok(worst)
}
