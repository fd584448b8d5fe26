//! Path simulation under a policy and an Euler-Maruyama reference for the
//! one-step moments.
//!
//! Seeding: a scenario carries a base seed; path `i` uses a ChaCha8 stream
//! seeded with the base seed and stream number `i`, so paths are independent
//! and each is reproducible on its own.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::constraints::feasible_actions;
use crate::cost::{expected_stage_cost, terminal_cost};
use crate::dynamics::{efficiency, moments, apply_noise, NoiseVector, TransitionMoments};
use crate::error::{Error, Result};
use crate::grid::StateGrid;
use crate::model::{Action, ModelConfig, State};
use crate::solver::PolicyTable;

/// Largest admissible per-step shift of the demand innovation mean.
pub const MAX_OFFSET: f64 = 1.5;
/// Shift used by the built-in favorable and adverse days.
pub const WEATHER_SHIFT: f64 = 0.5;

/// Weather scenario: per-day shifts of the mean of the demand innovation.
/// Negative shifts lower residual demand (sunny), positive raise it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub daily_offsets: Vec<f64>,
    pub seed: u64,
}

impl Scenario {
    pub fn new(name: &str, daily_offsets: Vec<f64>, seed: u64) -> Result<Self> {
        if let Some(o) = daily_offsets.iter().find(|o| !o.is_finite() || o.abs() > MAX_OFFSET) {
            return Err(Error::InvalidArgument(format!(
                "scenario offset {o} outside [-{MAX_OFFSET}, {MAX_OFFSET}]"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            daily_offsets,
            seed,
        })
    }

    /// Built-in weeks: `neutral`, `favorable-start` (3 good days then bad),
    /// `midweek-relief` (bad except days 4 and 7), `favorable-end` (4 bad
    /// days then good), `adverse-week` (bad except the last day).
    pub fn builtin(name: &str, seed: u64) -> Result<Self> {
        let (f, a) = (-WEATHER_SHIFT, WEATHER_SHIFT);
        let offsets = match name {
            "neutral" => vec![],
            "favorable-start" => vec![f, f, f, a, a, a, a],
            "midweek-relief" => vec![a, a, a, f, a, a, f],
            "favorable-end" => vec![a, a, a, a, f, f, f],
            "adverse-week" => vec![a, a, a, a, a, a, f],
            _ => return Err(Error::InvalidArgument(format!("unknown scenario '{name}'"))),
        };
        Self::new(name, offsets, seed)
    }

    /// The four weekly weather patterns studied in the reference experiment.
    pub const WEEKS: [&'static str; 4] = ["favorable-start", "midweek-relief", "favorable-end", "adverse-week"];

    /// Innovation shift at time `t` [h].
    pub fn offset(&self, t: f64) -> f64 {
        if self.daily_offsets.is_empty() {
            return 0.0;
        }
        let day = ((t / 24.0).floor().max(0.0) as usize).min(self.daily_offsets.len() - 1);
        self.daily_offsets[day]
    }
}

/// One logged step of a simulated path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub step: usize,
    pub time_h: f64,
    pub z: f64,
    pub r: f64,
    pub q: f64,
    pub g: f64,
    /// Decision taken; `None` at the horizon.
    pub action: Option<Action>,
    /// Expected discounted cost of the step, or the terminal cost at the horizon.
    pub stage_cost_eur: f64,
    pub cum_cost_eur: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimulationMode {
    /// Exact Gaussian transitions on the continuous state.
    Continuous,
    /// States snapped to grid points after each transition.
    DiscreteChain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub initial: State,
    pub mode: SimulationMode,
}

impl SimulationOptions {
    /// Full tank, 80% charge, demand deviation at the top of the grid.
    pub fn standard(grid: &StateGrid) -> Self {
        Self {
            initial: State::new(*grid.z.points.last().expect("non-empty axis"), 0.8, 1.0),
            mode: SimulationMode::Continuous,
        }
    }
}

/// Random generator for path `index` of a scenario.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_noise<R: Rng>(rng: &mut R) -> NoiseVector {
    NoiseVector {
        eps_z: rng.sample(StandardNormal),
        eps_q: rng.sample(StandardNormal),
        eps_g: rng.sample(StandardNormal),
    }
}

/// Draw the next state for an action.
pub fn sample_transition<R: Rng>(n: usize, x: &State, a: Action, rng: &mut R, cfg: &ModelConfig) -> State {
    apply_noise(&moments(n, x, a, cfg), &draw_noise(rng))
}

/// Idle decision: wait under shortfall or near-zero demand, overspill under surplus.
pub fn idle_action(n: usize, x: &State, cfg: &ModelConfig) -> Action {
    if feasible_actions(n, x, cfg).contains(Action::Wait) {
        Action::Wait
    } else {
        Action::Overspill
    }
}

/// Simulate one path with an arbitrary decision rule. Decisions infeasible
/// at the actual state are replaced by the idle action.
pub fn simulate_with<F>(
    decide: F,
    scenario: &Scenario,
    path_index: u64,
    cfg: &ModelConfig,
    grid: &StateGrid,
    opts: &SimulationOptions,
) -> Result<Vec<PathRecord>>
where
    F: Fn(usize, &State) -> Result<Action>,
{
    let mut rng = path_rng(scenario.seed, path_index);
    let disc = cfg.continuation_discount();
    let clamp = |s: State| State::new(s.z, s.q.clamp(0.0, 1.0), s.g.clamp(0.0, 1.0));
    let mut x = clamp(opts.initial);
    if opts.mode == SimulationMode::DiscreteChain {
        x = grid.snap(&x)?;
    }
    let steps = cfg.steps();
    let mut records = Vec::with_capacity(steps + 1);
    let mut cum = 0.0;
    let mut weight = 1.0;
    for n in 0..steps {
        let mut a = decide(n, &x)?;
        if !feasible_actions(n, &x, cfg).contains(a) {
            a = idle_action(n, &x, cfg);
        }
        let stage = expected_stage_cost(n, &x, a, cfg).value;
        cum += weight * stage;
        weight *= disc;
        records.push(PathRecord {
            step: n,
            time_h: cfg.time(n),
            z: x.z,
            r: cfg.residual_demand(n, x.z),
            q: x.q,
            g: x.g,
            action: Some(a),
            stage_cost_eur: stage,
            cum_cost_eur: cum,
        });
        let mut eps = draw_noise(&mut rng);
        eps.eps_z += scenario.offset(cfg.time(n));
        let next = clamp(apply_noise(&moments(n, &x, a, cfg), &eps));
        x = match opts.mode {
            SimulationMode::Continuous => next,
            SimulationMode::DiscreteChain => grid.snap(&next)?,
        };
    }
    let terminal = terminal_cost(&x, cfg);
    cum += weight * terminal;
    records.push(PathRecord {
        step: steps,
        time_h: cfg.time(steps),
        z: x.z,
        r: cfg.residual_demand(steps, x.z),
        q: x.q,
        g: x.g,
        action: None,
        stage_cost_eur: terminal,
        cum_cost_eur: cum,
    });
    Ok(records)
}

/// Simulate one path following a policy table read at the current cell.
pub fn simulate_path(
    policy: &PolicyTable,
    scenario: &Scenario,
    path_index: u64,
    cfg: &ModelConfig,
    grid: &StateGrid,
    opts: &SimulationOptions,
) -> Result<Vec<PathRecord>> {
    simulate_with(
        |n, x| Ok(policy.get(n, grid.locate(x)?)),
        scenario,
        path_index,
        cfg,
        grid,
        opts,
    )
}

/// Sample moments of one-step outcomes with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalMoments {
    pub estimate: TransitionMoments,
    pub std_error: TransitionMoments,
}

#[derive(Debug, Clone, Copy)]
struct Summary {
    mean: f64,
    var: f64,
    se_mean: f64,
    se_var: f64,
}

fn summarize(x: &[f64]) -> Summary {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for &v in x {
        let d = (v - mean) * (v - mean);
        m2 += d;
        m4 += d * d;
    }
    let var = m2 / n;
    let m4 = m4 / n;
    Summary {
        mean,
        var,
        se_mean: (var / n).sqrt(),
        se_var: ((m4 - var * var).max(0.0) / n).sqrt(),
    }
}

/// Covariance, its standard error, correlation and its standard error.
fn co_moments(x: &[f64], y: &[f64], sx: &Summary, sy: &Summary) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    if sx.var <= 0.0 || sy.var <= 0.0 {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - sx.mean) * (b - sy.mean)).collect();
    let cov = prods.iter().sum::<f64>() / n;
    let se_cov = (prods.iter().map(|p| (p - cov) * (p - cov)).sum::<f64>() / n / n).sqrt();
    let rho = cov / (sx.var * sy.var).sqrt();
    (cov, se_cov, rho, (1.0 - rho * rho) / n.sqrt())
}

/// Euler-Maruyama reference for the one-step moments of every listed
/// action, with common random numbers across actions. Seasonal mean and
/// efficiency are frozen at the start of the step.
pub fn euler_oracle_many(
    n: usize,
    x: &State,
    actions: &[Action],
    paths: usize,
    inner_step: f64,
    seed: u64,
    cfg: &ModelConfig,
) -> Result<Vec<EmpiricalMoments>> {
    let dt = cfg.step_length();
    if !(inner_step > 0.0 && inner_step <= dt / 100.0 + 1e-15) {
        return Err(Error::InvalidArgument(format!(
            "inner step {inner_step} must lie in (0, {}]",
            dt / 100.0
        )));
    }
    let substeps = (dt / inner_step).round() as usize;
    let h = dt / substeps as f64;
    let beta = cfg.demand.beta;
    let sigma_sqrt_h = cfg.demand.sigma * h.sqrt();
    let mu = cfg.seasonal_mean(n);
    let eff = efficiency(cfg.time(n), x.z, x.q, cfg);
    let cap_q = cfg.battery.capacity;
    let eta0 = cfg.battery.eta0;
    let gen = &cfg.generator;
    let na = actions.len();

    const CHUNK: usize = 1000;
    let chunks = paths.div_ceil(CHUNK);
    // samples[chunk] = per path, per action: (z, q, g)
    let samples: Vec<Vec<(f64, f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = path_rng(seed, c as u64);
            let count = CHUNK.min(paths - c * CHUNK);
            let mut out = Vec::with_capacity(count * na);
            let mut qs = vec![0.0; na];
            let mut gs = vec![0.0; na];
            for _ in 0..count {
                let mut z = x.z;
                qs.iter_mut().for_each(|q| *q = x.q);
                gs.iter_mut().for_each(|g| *g = x.g);
                for _ in 0..substeps {
                    for (ai, &a) in actions.iter().enumerate() {
                        let dq = match a {
                            Action::Charge | Action::DischargeFull => -eff / cap_q * (mu + z) - eta0 * qs[ai],
                            Action::DischargeLimited => -eff / cap_q * cfg.battery.limited_power - eta0 * qs[ai],
                            _ => -eta0 * qs[ai],
                        };
                        let dg = match a {
                            Action::FuelFull => -(gen.idle_rate + gen.load_rate * (mu + z)) / gen.capacity,
                            Action::FuelLimited => -(gen.idle_rate + gen.load_rate * gen.limited_power) / gen.capacity,
                            _ => 0.0,
                        };
                        qs[ai] += dq * h;
                        gs[ai] += dg * h;
                    }
                    let xi: f64 = rng.sample(StandardNormal);
                    z += -beta * z * h + sigma_sqrt_h * xi;
                }
                for ai in 0..na {
                    out.push((z, qs[ai], gs[ai]));
                }
            }
            out
        })
        .collect();

    let mut result = Vec::with_capacity(na);
    for ai in 0..na {
        let mut zs = Vec::with_capacity(paths);
        let mut qs = Vec::with_capacity(paths);
        let mut gs = Vec::with_capacity(paths);
        for chunk in &samples {
            for s in chunk.iter().skip(ai).step_by(na) {
                zs.push(s.0);
                qs.push(s.1);
                gs.push(s.2);
            }
        }
        let (sz, sq, sg) = (summarize(&zs), summarize(&qs), summarize(&gs));
        let (cov_zq, se_cov_zq, rho_q, se_rho_q) = co_moments(&zs, &qs, &sz, &sq);
        let (cov_zg, se_cov_zg, rho_g, se_rho_g) = co_moments(&zs, &gs, &sz, &sg);
        result.push(EmpiricalMoments {
            estimate: TransitionMoments {
                mean_z: sz.mean,
                var_z: sz.var,
                mean_q: sq.mean,
                var_q: sq.var,
                mean_g: sg.mean,
                var_g: sg.var,
                cov_zq,
                rho_q,
                cov_zg,
                rho_g,
            },
            std_error: TransitionMoments {
                mean_z: sz.se_mean,
                var_z: sz.se_var,
                mean_q: sq.se_mean,
                var_q: sq.se_var,
                mean_g: sg.se_mean,
                var_g: sg.se_var,
                cov_zq: se_cov_zq,
                rho_q: se_rho_q,
                cov_zg: se_cov_zg,
                rho_g: se_rho_g,
            },
        });
    }
    Ok(result)
}

/// Euler-Maruyama reference for a single action.
pub fn euler_oracle(
    n: usize,
    x: &State,
    a: Action,
    paths: usize,
    inner_step: f64,
    seed: u64,
    cfg: &ModelConfig,
) -> Result<EmpiricalMoments> {
    Ok(euler_oracle_many(n, x, &[a], paths, inner_step, seed, cfg)?[0])
}
