//! Truncated, discretized state space with half-open cells.
//!
//! The demand axis covers three stationary standard deviations around zero;
//! its outer cells extend to infinity. The state-of-charge and fuel axes
//! cover [0,1] and values outside are assigned to the boundary cells.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelConfig, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Z,
    Q,
    G,
}

/// Interval (lo, hi], closed on the left when `lo_closed` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        let above = if self.lo_closed { v >= self.lo } else { v > self.lo };
        above && v <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisGrid {
    pub points: Vec<f64>,
    pub spacing: f64,
    /// Boundaries between consecutive cells (midpoints of adjacent points).
    pub boundaries: Vec<f64>,
    #[serde(skip)]
    unbounded: bool,
}

impl AxisGrid {
    fn uniform(lo: f64, hi: f64, intervals: usize, unbounded: bool) -> Self {
        let points: Vec<f64> = (0..=intervals)
            .map(|i| lo + (hi - lo) * i as f64 / intervals as f64)
            .collect();
        let boundaries = points.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Self {
            points,
            spacing: (hi - lo) / intervals as f64,
            boundaries,
            unbounded,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the cell containing `v`; cells are (lo, hi].
    pub fn cell_of(&self, v: f64) -> Result<usize> {
        if v.is_nan() {
            return Err(Error::InvalidArgument("cannot locate NaN on a grid axis".into()));
        }
        Ok(self.boundaries.partition_point(|&b| b < v))
    }

    pub fn neighborhood(&self, i: usize) -> Result<Interval> {
        let last = self.points.len() - 1;
        if i > last {
            return Err(Error::InvalidArgument(format!("cell index {i} out of range 0..={last}")));
        }
        let (lo, lo_closed) = match (i, self.unbounded) {
            (0, true) => (f64::NEG_INFINITY, false),
            (0, false) => (self.points[0], true),
            _ => (self.boundaries[i - 1], false),
        };
        let hi = match (i == last, self.unbounded) {
            (true, true) => f64::INFINITY,
            (true, false) => self.points[last],
            _ => self.boundaries[i],
        };
        Ok(Interval { lo, hi, lo_closed })
    }
}

/// Cartesian product of the three axes with a flat index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateGrid {
    pub z: AxisGrid,
    pub q: AxisGrid,
    pub g: AxisGrid,
}

impl StateGrid {
    pub fn axis(&self, axis: Axis) -> &AxisGrid {
        match axis {
            Axis::Z => &self.z,
            Axis::Q => &self.q,
            Axis::G => &self.g,
        }
    }

    pub fn num_states(&self) -> usize {
        self.z.len() * self.q.len() * self.g.len()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.q.len() + j) * self.g.len() + k
    }

    pub fn coords(&self, id: usize) -> (usize, usize, usize) {
        let k = id % self.g.len();
        let rest = id / self.g.len();
        (rest / self.q.len(), rest % self.q.len(), k)
    }

    pub fn state(&self, id: usize) -> State {
        let (i, j, k) = self.coords(id);
        State::new(self.z.points[i], self.q.points[j], self.g.points[k])
    }

    pub fn cell_of(&self, value: f64, axis: Axis) -> Result<usize> {
        self.axis(axis).cell_of(value)
    }

    pub fn neighborhood(&self, axis: Axis, i: usize) -> Result<Interval> {
        self.axis(axis).neighborhood(i)
    }

    /// Flat index of the cell containing a continuous state.
    pub fn locate(&self, x: &State) -> Result<usize> {
        Ok(self.index(
            self.z.cell_of(x.z)?,
            self.q.cell_of(x.q)?,
            self.g.cell_of(x.g)?,
        ))
    }

    /// Snap a continuous state to the grid point of its cell.
    pub fn snap(&self, x: &State) -> Result<State> {
        Ok(self.state(self.locate(x)?))
    }

    pub fn summary(&self) -> GridSummary {
        let ax = |a: &AxisGrid| AxisSummary {
            min: a.points[0],
            max: a.points[a.len() - 1],
            spacing: a.spacing,
            points: a.len(),
        };
        GridSummary {
            z: ax(&self.z),
            q: ax(&self.q),
            g: ax(&self.g),
            states: self.num_states(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisSummary {
    pub min: f64,
    pub max: f64,
    pub spacing: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub z: AxisSummary,
    pub q: AxisSummary,
    pub g: AxisSummary,
    pub states: usize,
}

pub fn build_grid(cfg: &ModelConfig) -> StateGrid {
    let zb = cfg.z_bound();
    let d = &cfg.discretization;
    StateGrid {
        z: AxisGrid::uniform(-zb, zb, d.z_intervals, true),
        q: AxisGrid::uniform(0.0, 1.0, d.q_intervals, false),
        g: AxisGrid::uniform(0.0, 1.0, d.g_intervals, false),
    }
}

/// Limited-mode threshold: on a residual-demand grid over [-r_max, r_max]
/// with `intervals` cells, the cell midpoint closest to r_max / 2.
pub fn limited_mode_threshold(r_max: f64, intervals: usize) -> f64 {
    let width = 2.0 * r_max / intervals as f64;
    (0..intervals)
        .map(|i| -r_max + (i as f64 + 0.5) * width)
        .min_by(|a, b| (a - 0.5 * r_max).abs().total_cmp(&(b - 0.5 * r_max).abs()))
        .expect("at least one interval")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_grid() {
        let g = build_grid(&ModelConfig::default());
        assert_eq!(g.num_states(), 18 * 11 * 11);
        assert!((g.z.points[17] - 2.13).abs() < 5e-3);
        assert_eq!(g.z.points[0], -g.z.points[17]);
        assert!((g.q.spacing - 0.1).abs() < 1e-15);
        for (j, q) in g.q.points.iter().enumerate() {
            assert!((q - j as f64 / 10.0).abs() < 1e-15);
        }
        // zero is the boundary between the two middle demand cells
        assert!(g.z.boundaries[8].abs() < 1e-15);
    }

    #[test]
    fn threshold_midpoint() {
        let r = limited_mode_threshold(3.0, 17);
        assert!((r - (-3.0 + 12.5 * 6.0 / 17.0)).abs() < 1e-15);
        assert!((r - 1.4118).abs() < 5e-5);
    }

    #[test]
    fn neighborhoods() {
        let g = build_grid(&ModelConfig::default());
        let s0 = g.neighborhood(Axis::Z, 0).unwrap();
        assert_eq!(s0.lo, f64::NEG_INFINITY);
        assert!((s0.hi - (g.z.points[0] + 0.5 * g.z.spacing)).abs() < 1e-14);
        let sq = g.neighborhood(Axis::Q, 3).unwrap();
        assert!((sq.lo - 0.25).abs() < 1e-15 && (sq.hi - 0.35).abs() < 1e-15);
        assert!(!sq.lo_closed);
        assert!(g.neighborhood(Axis::G, 11).is_err());
    }

    #[test]
    fn snapping_rules() {
        let g = build_grid(&ModelConfig::default());
        assert_eq!(g.cell_of(-0.03, Axis::Q).unwrap(), 0);
        assert_eq!(g.cell_of(1.2, Axis::G).unwrap(), 10);
        assert_eq!(g.cell_of(-50.0, Axis::Z).unwrap(), 0);
        assert_eq!(g.cell_of(50.0, Axis::Z).unwrap(), 17);
        for (i, &p) in g.z.points.iter().enumerate() {
            assert_eq!(g.cell_of(p, Axis::Z).unwrap(), i);
        }
        let b = g.q.boundaries[4];
        assert_eq!(g.cell_of(b, Axis::Q).unwrap(), 4);
        assert!(g.cell_of(f64::NAN, Axis::Q).is_err());
    }

    #[test]
    fn index_bijection() {
        let g = build_grid(&ModelConfig::default());
        let mut seen = vec![false; g.num_states()];
        for i in 0..g.z.len() {
            for j in 0..g.q.len() {
                for k in 0..g.g.len() {
                    let id = g.index(i, j, k);
                    assert!(!seen[id]);
                    seen[id] = true;
                    assert_eq!(g.coords(id), (i, j, k));
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }
}
