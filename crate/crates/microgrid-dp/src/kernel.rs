//! Transition probability rows over the state grid.
//!
//! Charging or discharging the battery makes (Z, Q) jointly Gaussian and
//! running the generator at full load makes (Z, G) jointly Gaussian; every
//! other axis is deterministic and lands in a single cell. Joint cell masses
//! are computed by reducing the bivariate normal rectangle probability to a
//! one-dimensional integral of a conditional normal CDF.

use std::borrow::Cow;
use std::sync::Arc;

use dashmap::DashMap;

use crate::constraints::feasible_actions;
use crate::dynamics::{moments, TransitionMoments};
use crate::error::{Error, Result};
use crate::grid::{AxisGrid, StateGrid};
use crate::math::{integrate, norm_cdf, norm_interval, norm_pdf};
use crate::model::{Action, ModelConfig};

/// Standardized values beyond this are treated as probability 0 or 1.
const TAIL: f64 = 8.5;
/// Absolute tolerance of each strip integral.
const STRIP_TOL: f64 = 1e-12;
/// Rows whose mass deviates from one by more than this are rejected.
const RENORMALIZE_LIMIT: f64 = 1e-6;

/// Sparse probability row sorted by target state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransitionRow {
    pub entries: Vec<(usize, f64)>,
}

impl TransitionRow {
    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// Expectation of a function tabulated on the grid.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.entries.iter().map(|&(id, p)| p * values[id]).sum()
    }

    pub fn probability(&self, target: usize) -> f64 {
        self.entries
            .binary_search_by_key(&target, |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }
}

/// Integral over x in (lo, hi] of phi(x) * Phi((b - rho x) / c), where
/// c = sqrt(1 - rho^2). Equals P(X in (lo, hi], Y <= b) for standard normals
/// with correlation rho.
fn strip_cdf(lo: f64, hi: f64, b: f64, rho: f64, c: f64) -> f64 {
    if b == f64::INFINITY {
        return norm_interval(lo, hi);
    }
    if b == f64::NEG_INFINITY || hi <= lo {
        return 0.0;
    }
    let lo = lo.max(-40.0);
    let hi = hi.min(40.0);
    if hi <= lo {
        return 0.0;
    }
    if rho == 0.0 {
        return norm_interval(lo, hi) * norm_cdf(b);
    }
    // x-range where the conditional CDF is neither 0 nor 1 to double precision.
    let (x1, x2) = {
        let a = (b - TAIL * c) / rho;
        let d = (b + TAIL * c) / rho;
        (a.min(d), a.max(d))
    };
    // Part of (lo, hi] where the conditional CDF is 1: x below x1 when rho > 0.
    let saturated = if rho > 0.0 {
        norm_interval(lo, hi.min(x1))
    } else {
        norm_interval(lo.max(x2), hi)
    };
    let a = lo.max(x1);
    let d = hi.min(x2);
    let active = if d > a {
        integrate(|x| norm_pdf(x) * norm_cdf((b - rho * x) / c), a, d, STRIP_TOL)
    } else {
        0.0
    };
    saturated + active
}

/// Probability of the rectangle (lo_1, hi_1] x (lo_2, hi_2] under a
/// bivariate normal law. Interval ends may be infinite.
pub fn bvn_rect_prob(mean: [f64; 2], cov: [[f64; 2]; 2], rect: [(f64, f64); 2]) -> Result<f64> {
    let (v1, v2, c12) = (cov[0][0], cov[1][1], cov[0][1]);
    if !(v1 > 0.0 && v2 > 0.0) || !c12.is_finite() || (cov[1][0] - c12).abs() > 1e-12 * (v1 * v2).sqrt() {
        return Err(Error::NotPositiveDefinite(format!("{cov:?}")));
    }
    let rho = c12 / (v1 * v2).sqrt();
    if rho.abs() >= 1.0 {
        return Err(Error::NotPositiveDefinite(format!("correlation {rho}")));
    }
    let (s1, s2) = (v1.sqrt(), v2.sqrt());
    let lo1 = (rect[0].0 - mean[0]) / s1;
    let hi1 = (rect[0].1 - mean[0]) / s1;
    let lo2 = (rect[1].0 - mean[1]) / s2;
    let hi2 = (rect[1].1 - mean[1]) / s2;
    if hi1 <= lo1 || hi2 <= lo2 {
        return Ok(0.0);
    }
    let c = (1.0 - rho * rho).sqrt();
    let p = strip_cdf(lo1, hi1, hi2, rho, c) - strip_cdf(lo1, hi1, lo2, rho, c);
    Ok(p.clamp(0.0, 1.0))
}

/// Standardized cell bounds of an axis under N(mean, sd^2). The first and
/// last cells are unbounded because boundary cells absorb the tails.
fn standardized_cuts(axis: &AxisGrid, mean: f64, sd: f64) -> Vec<f64> {
    let mut cuts = Vec::with_capacity(axis.len() + 1);
    cuts.push(f64::NEG_INFINITY);
    cuts.extend(axis.boundaries.iter().map(|b| (b - mean) / sd));
    cuts.push(f64::INFINITY);
    cuts
}

/// Cell masses of N(mean, sd^2) on an axis.
fn univariate_masses(axis: &AxisGrid, mean: f64, sd: f64) -> Vec<f64> {
    standardized_cuts(axis, mean, sd)
        .windows(2)
        .map(|w| norm_interval(w[0], w[1]))
        .collect()
}

/// Joint cell masses [z-cell][other-cell] of a correlated Gaussian pair.
/// Each z-row telescopes to the exact univariate z mass.
fn joint_masses(
    z_axis: &AxisGrid,
    other: &AxisGrid,
    mean: [f64; 2],
    sd: [f64; 2],
    rho: f64,
) -> Vec<Vec<f64>> {
    let zc = standardized_cuts(z_axis, mean[0], sd[0]);
    let oc = standardized_cuts(other, mean[1], sd[1]);
    let c = (1.0 - rho * rho).sqrt();
    zc.windows(2)
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            let total = norm_interval(lo, hi);
            let mut out = vec![0.0; other.len()];
            if total == 0.0 {
                return out;
            }
            let mut prev = 0.0;
            for (j, cell) in out.iter_mut().enumerate() {
                let upper = if j + 1 == other.len() {
                    total
                } else {
                    strip_cdf(lo, hi, oc[j + 1], rho, c).min(total)
                };
                *cell = (upper - prev).max(0.0);
                prev = prev.max(upper);
            }
            out
        })
        .collect()
}

type RowKey = (usize, usize, Action);

/// Transition rows for a fixed configuration and grid, with an optional
/// concurrent memo table.
pub struct Kernel {
    cfg: ModelConfig,
    grid: StateGrid,
    /// Z-cell masses indexed by source z-cell; independent of the step.
    z_masses: Vec<Vec<f64>>,
    memo: Option<DashMap<RowKey, Arc<TransitionRow>>>,
}

impl Kernel {
    pub fn new(cfg: &ModelConfig, grid: &StateGrid) -> Self {
        let z_masses = grid
            .z
            .points
            .iter()
            .map(|&z| {
                let (m, v) = crate::dynamics::z_moments(0, z, cfg);
                univariate_masses(&grid.z, m, v.sqrt())
            })
            .collect();
        Self {
            cfg: cfg.clone(),
            grid: grid.clone(),
            z_masses,
            memo: None,
        }
    }

    /// Keep computed rows for reuse across calls.
    pub fn with_memo(mut self) -> Self {
        self.memo = Some(DashMap::new());
        self
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &StateGrid {
        &self.grid
    }

    /// Row for a feasible action; infeasible actions are a contract violation.
    pub fn transition_row(&self, n: usize, source: usize, a: Action) -> Result<Arc<TransitionRow>> {
        let x = self.grid.state(source);
        if !feasible_actions(n, &x, &self.cfg).contains(a) {
            return Err(Error::Infeasible {
                step: n,
                state: source,
                action: a,
            });
        }
        self.row_unchecked(n, source, a)
    }

    /// Row for an action the caller already knows to be feasible; served from
    /// the memo table when enabled.
    pub fn row_unchecked(&self, n: usize, source: usize, a: Action) -> Result<Arc<TransitionRow>> {
        if let Some(memo) = &self.memo {
            if let Some(row) = memo.get(&(n, source, a)) {
                return Ok(Arc::clone(&row));
            }
        }
        let row = Arc::new(self.compute_row(n, source, a)?);
        if let Some(memo) = &self.memo {
            memo.insert((n, source, a), Arc::clone(&row));
        }
        Ok(row)
    }

    /// Row computed from the closed-form moments, without feasibility check.
    pub fn compute_row(&self, n: usize, source: usize, a: Action) -> Result<TransitionRow> {
        let x = self.grid.state(source);
        let m = moments(n, &x, a, &self.cfg);
        self.row_from_moments(n, source, a, &m)
    }

    /// Total cell mass of a row before renormalization.
    pub fn raw_mass(&self, n: usize, source: usize, a: Action) -> Result<f64> {
        let x = self.grid.state(source);
        let m = moments(n, &x, a, &self.cfg);
        Ok(self.raw_entries(n, source, &m)?.iter().map(|e| e.1).sum())
    }

    /// Row for explicitly supplied moments.
    pub fn row_from_moments(
        &self,
        n: usize,
        source: usize,
        a: Action,
        m: &TransitionMoments,
    ) -> Result<TransitionRow> {
        let mut row = TransitionRow {
            entries: self.raw_entries(n, source, m)?,
        };
        let sum = row.sum();
        if !sum.is_finite() || (1.0 - sum).abs() > RENORMALIZE_LIMIT {
            return Err(Error::NonNormalizing {
                step: n,
                state: source,
                action: a,
                sum,
            });
        }
        if sum != 1.0 {
            for e in &mut row.entries {
                e.1 /= sum;
            }
        }
        Ok(row)
    }

    fn raw_entries(&self, n: usize, source: usize, m: &TransitionMoments) -> Result<Vec<(usize, f64)>> {
        let g = &self.grid;
        let (src_i, _, _) = g.coords(source);
        let sz = m.var_z.sqrt();
        let (mz, vz) = crate::dynamics::z_moments(n, g.z.points[src_i], &self.cfg);
        let z_masses: Cow<[f64]> = if m.mean_z == mz && m.var_z == vz {
            Cow::Borrowed(&self.z_masses[src_i])
        } else {
            Cow::Owned(univariate_masses(&g.z, m.mean_z, sz))
        };

        let mut entries = Vec::new();
        if m.var_q > 0.0 {
            let k = g.g.cell_of(m.mean_g)?;
            let joint = joint_masses(&g.z, &g.q, [m.mean_z, m.mean_q], [sz, m.var_q.sqrt()], m.rho_q);
            for (i, row) in joint.iter().enumerate() {
                for (j, &p) in row.iter().enumerate() {
                    if p > 0.0 {
                        entries.push((g.index(i, j, k), p));
                    }
                }
            }
        } else if m.var_g > 0.0 {
            let j = g.q.cell_of(m.mean_q)?;
            let joint = joint_masses(&g.z, &g.g, [m.mean_z, m.mean_g], [sz, m.var_g.sqrt()], m.rho_g);
            for (i, row) in joint.iter().enumerate() {
                for (k, &p) in row.iter().enumerate() {
                    if p > 0.0 {
                        entries.push((g.index(i, j, k), p));
                    }
                }
            }
        } else {
            let j = g.q.cell_of(m.mean_q)?;
            let k = g.g.cell_of(m.mean_g)?;
            for (i, &p) in z_masses.iter().enumerate() {
                if p > 0.0 {
                    entries.push((g.index(i, j, k), p));
                }
            }
        }
        entries.sort_unstable_by_key(|e| e.0);
        Ok(entries)
    }
}
