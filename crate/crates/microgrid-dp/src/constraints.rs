//! State- and time-dependent feasible action sets.
//!
//! Under surplus (r < 0) the choice is between charging and overspilling;
//! under shortfall (r >= 0) between waiting, discharging and running the
//! generator. Actions that move the battery or the tank are admitted only if
//! the Gaussian probability of leaving [0,1] one step ahead is below epsilon.

use crate::dynamics::{g_moments, q_moments};
use crate::math::norm_cdf;
use crate::model::{Action, ModelConfig, State};

/// Reason an action was excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exclusion {
    /// Residual demand lies within half a cell of zero; only waiting is allowed.
    NearZero,
    /// Action incompatible with the sign of residual demand.
    WrongSign,
    /// Residual demand below the limited-mode threshold.
    BelowThreshold,
    /// P(Q' < 0) >= epsilon.
    BatteryUnderflow,
    /// P(Q' > 1) >= epsilon.
    BatteryOverflow,
    /// P(G' < 0) >= epsilon.
    FuelUnderflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeasibleSet {
    mask: u8,
    excluded: [Option<Exclusion>; 7],
}

impl FeasibleSet {
    fn empty() -> Self {
        Self {
            mask: 0,
            excluded: [None; 7],
        }
    }

    fn admit(&mut self, a: Action) {
        self.mask |= 1 << a.index();
        self.excluded[a.index()] = None;
    }

    fn exclude(&mut self, a: Action, why: Exclusion) {
        self.mask &= !(1 << a.index());
        self.excluded[a.index()] = Some(why);
    }

    pub fn contains(&self, a: Action) -> bool {
        self.mask & (1 << a.index()) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    /// Admissible actions in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = Action> + '_ {
        Action::ALL.into_iter().filter(|a| self.contains(*a))
    }

    /// Why `a` is not admissible, if it is not.
    pub fn exclusion(&self, a: Action) -> Option<Exclusion> {
        self.excluded[a.index()]
    }

    pub fn is_subset_of(&self, other: &FeasibleSet) -> bool {
        self.mask & !other.mask == 0
    }
}

/// P(X < 0) and P(X > 1) for X ~ N(mean, var); var = 0 gives the point mass.
fn box_violation(mean: f64, var: f64) -> (f64, f64) {
    if var > 0.0 {
        let s = var.sqrt();
        (norm_cdf(-mean / s), norm_cdf((mean - 1.0) / s))
    } else {
        let below = if mean < 0.0 { 1.0 } else { 0.0 };
        let above = if mean > 1.0 { 1.0 } else { 0.0 };
        (below, above)
    }
}

pub fn feasible_actions(n: usize, x: &State, cfg: &ModelConfig) -> FeasibleSet {
    let r = cfg.residual_demand(n, x.z);
    let eps = cfg.discretization.epsilon;
    let mut set = FeasibleSet::empty();

    if cfg.is_near_zero(r) {
        for a in Action::ALL {
            set.exclude(a, Exclusion::NearZero);
        }
        set.admit(Action::Wait);
        return set;
    }

    let battery_check = |set: &mut FeasibleSet, a: Action| {
        let (m, v) = q_moments(n, x.z, x.q, a, cfg);
        let (below, above) = box_violation(m, v);
        if below >= eps {
            set.exclude(a, Exclusion::BatteryUnderflow);
        } else if above >= eps {
            set.exclude(a, Exclusion::BatteryOverflow);
        } else {
            set.admit(a);
        }
    };
    let fuel_check = |set: &mut FeasibleSet, a: Action| {
        let (m, v) = g_moments(n, x.z, x.g, a, cfg);
        if box_violation(m, v).0 >= eps {
            set.exclude(a, Exclusion::FuelUnderflow);
        } else {
            set.admit(a);
        }
    };

    if r < 0.0 {
        for a in [Action::Wait, Action::DischargeLimited, Action::DischargeFull, Action::FuelLimited, Action::FuelFull] {
            set.exclude(a, Exclusion::WrongSign);
        }
        set.admit(Action::Overspill);
        battery_check(&mut set, Action::Charge);
    } else {
        for a in [Action::Overspill, Action::Charge] {
            set.exclude(a, Exclusion::WrongSign);
        }
        set.admit(Action::Wait);
        battery_check(&mut set, Action::DischargeFull);
        if r >= cfg.battery.limited_power {
            battery_check(&mut set, Action::DischargeLimited);
        } else {
            set.exclude(Action::DischargeLimited, Exclusion::BelowThreshold);
        }
        fuel_check(&mut set, Action::FuelFull);
        if r >= cfg.generator.limited_power {
            fuel_check(&mut set, Action::FuelLimited);
        } else {
            set.exclude(Action::FuelLimited, Exclusion::BelowThreshold);
        }
    }
    set
}
