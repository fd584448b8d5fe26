//! Running, expected stage and terminal costs.

use serde::Serialize;

use crate::math::{decay_integral, integrate};
use crate::model::{Action, ModelConfig, State};

/// Discounted integrals over one step of e^(-rho s), e^(-(rho+beta) s) and
/// e^(-(rho+2 beta) s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscountFactors {
    pub zeta1: f64,
    pub zeta2: f64,
    pub zeta3: f64,
}

/// A cost split by origin [EUR].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StageCost {
    pub value: f64,
    pub fuel: f64,
    pub degradation: f64,
    pub discomfort: f64,
}

impl StageCost {
    fn new(fuel: f64, degradation: f64, discomfort: f64) -> Self {
        Self {
            value: fuel + degradation + discomfort,
            fuel,
            degradation,
            discomfort,
        }
    }
}

pub fn discount_factors(cfg: &ModelConfig) -> DiscountFactors {
    let dt = cfg.step_length();
    let rho = cfg.costs.rho;
    let beta = cfg.demand.beta;
    DiscountFactors {
        zeta1: decay_integral(rho, dt),
        zeta2: decay_integral(rho + beta, dt),
        zeta3: decay_integral(rho + 2.0 * beta, dt),
    }
}

/// Instantaneous cost rate at time `t` [EUR/h].
pub fn running_cost(t: f64, x: &State, a: Action, cfg: &ModelConfig) -> StageCost {
    let r = cfg.demand.seasonality(t) + x.z;
    let c = &cfg.costs;
    let gen = &cfg.generator;
    let k0 = c.discomfort;
    match a {
        Action::FuelFull => StageCost::new(c.fuel_price * (gen.idle_rate + gen.load_rate * r), 0.0, 0.0),
        Action::FuelLimited => {
            let short = r - gen.limited_power;
            StageCost::new(
                c.fuel_price * (gen.idle_rate + gen.load_rate * gen.limited_power),
                0.0,
                k0 * short * short,
            )
        }
        Action::DischargeFull => StageCost::new(0.0, c.degradation * r, 0.0),
        Action::DischargeLimited => {
            let short = r - cfg.battery.limited_power;
            StageCost::new(0.0, c.degradation * cfg.battery.limited_power, k0 * short * short)
        }
        Action::Charge => StageCost::new(0.0, c.degradation * r.abs(), 0.0),
        Action::Wait => StageCost::new(0.0, 0.0, k0 * r * r),
        Action::Overspill => StageCost::default(),
    }
}

/// Conditional expectation of the discounted running cost over step `k`,
/// with the seasonal mean frozen at its value at the start of the step.
pub fn expected_stage_cost(k: usize, x: &State, a: Action, cfg: &ModelConfig) -> StageCost {
    let DiscountFactors { zeta1, zeta2, zeta3 } = discount_factors(cfg);
    let mu = cfg.seasonal_mean(k);
    let z = x.z;
    let s2 = cfg.demand.stationary_variance();
    let c = &cfg.costs;
    let gen = &cfg.generator;
    let k0 = c.discomfort;

    // Discounted expectation of (R - level)^2 over the step.
    let squared_gap = |level: f64| {
        let d = mu - level;
        d * d * zeta1 + 2.0 * d * z * zeta2 + z * z * zeta3 + s2 * (zeta1 - zeta3)
    };
    let linear = mu * zeta1 + z * zeta2;

    match a {
        Action::FuelFull => StageCost::new(
            c.fuel_price * ((gen.idle_rate + gen.load_rate * mu) * zeta1 + gen.load_rate * z * zeta2),
            0.0,
            0.0,
        ),
        Action::FuelLimited => StageCost::new(
            c.fuel_price * (gen.idle_rate + gen.load_rate * gen.limited_power) * zeta1,
            0.0,
            k0 * squared_gap(gen.limited_power),
        ),
        Action::DischargeFull => StageCost::new(0.0, c.degradation * linear, 0.0),
        Action::DischargeLimited => StageCost::new(
            0.0,
            c.degradation * cfg.battery.limited_power * zeta1,
            k0 * squared_gap(cfg.battery.limited_power),
        ),
        Action::Charge => StageCost::new(0.0, -c.degradation * linear, 0.0),
        Action::Wait => StageCost::new(0.0, 0.0, k0 * squared_gap(0.0)),
        Action::Overspill => StageCost::default(),
    }
}

/// Cost at the horizon: penalty for a battery below the reference level,
/// minus liquidation values of surplus energy and remaining fuel [EUR].
pub fn terminal_cost(x: &State, cfg: &ModelConfig) -> f64 {
    let q = x.q.clamp(0.0, 1.0);
    let g = x.g.clamp(0.0, 1.0);
    let b = &cfg.battery;
    let c = &cfg.costs;
    const TOL: f64 = 1e-10;

    let mut cost = 0.0;
    if q < c.q_ref && c.battery_penalty != 0.0 {
        let missing = integrate(|s| 1.0 / b.charge_efficiency(s), q, c.q_ref, TOL);
        cost += c.battery_penalty * b.capacity * missing;
    }
    if q > c.q_ref && c.battery_liquidation != 0.0 {
        let surplus = integrate(|s| b.discharge_efficiency(s), c.q_ref, q, TOL);
        cost -= c.battery_liquidation * b.capacity * surplus;
    }
    cost - c.fuel_liquidation * cfg.generator.capacity * g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_values() {
        let cfg = ModelConfig::default();
        let d = discount_factors(&cfg);
        assert!((d.zeta1 - (1.0 - (-0.03f64).exp()) / 0.03).abs() < 1e-15);
        assert!((d.zeta1 - 0.985_15).abs() < 5e-6);
        assert!(d.zeta1 > d.zeta2 && d.zeta2 > d.zeta3 && d.zeta3 > 0.0);
        assert!(d.zeta1 <= cfg.step_length());

        let mut c = cfg.clone();
        c.costs.rho = 1e-12;
        assert!((discount_factors(&c).zeta1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn running_cost_examples() {
        let cfg = ModelConfig::default();
        // t = 0: seasonal mean 1.2, so z = r - 1.2
        let at = |r: f64| State::new(r - 1.2, 0.5, 0.5);
        assert_eq!(running_cost(0.0, &at(3.0), Action::Overspill, &cfg).value, 0.0);
        let fl = running_cost(0.0, &at(3.0), Action::FuelLimited, &cfg).value;
        let expected = 1.5 * (0.5 + 0.35 * 1.4118) + 0.575 * (3.0f64 - 1.4118).powi(2);
        assert!((fl - expected).abs() < 1e-12);
        assert!((fl - 2.941_57).abs() < 1e-5);
        let w = running_cost(0.0, &at(2.0), Action::Wait, &cfg).value;
        assert!((w - 2.3).abs() < 1e-12);
    }

    #[test]
    fn discomfort_vanishes_at_thresholds() {
        let cfg = ModelConfig::default();
        let at = |r: f64| State::new(r - 1.2, 0.5, 0.5);
        assert_eq!(running_cost(0.0, &at(1.4118), Action::DischargeLimited, &cfg).discomfort, 0.0);
        assert_eq!(running_cost(0.0, &at(1.4118), Action::FuelLimited, &cfg).discomfort, 0.0);
        assert_eq!(running_cost(0.0, &at(0.0), Action::Wait, &cfg).discomfort, 0.0);
    }

    #[test]
    fn expected_wait_at_zero_deviation() {
        let cfg = ModelConfig::default();
        let d = discount_factors(&cfg);
        let mu = cfg.seasonal_mean(3);
        let s2 = 0.45 * 0.45 / 0.4;
        let expected = 0.575 * (d.zeta1 * (mu * mu + s2) - s2 * d.zeta3);
        let got = expected_stage_cost(3, &State::new(0.0, 0.5, 0.5), Action::Wait, &cfg).value;
        assert!((got - expected).abs() < 1e-13);
        assert_eq!(expected_stage_cost(3, &State::new(1.0, 0.5, 0.5), Action::Overspill, &cfg).value, 0.0);
    }

    #[test]
    fn terminal_examples() {
        let cfg = ModelConfig::default();
        assert!(terminal_cost(&State::new(0.0, 0.8, 0.0), &cfg).abs() < 1e-12);
        assert!((terminal_cost(&State::new(0.0, 0.8, 1.0), &cfg) + 25.0).abs() < 1e-12);
        // reference value from an independent adaptive quadrature
        let v = terminal_cost(&State::new(0.0, 0.0, 0.0), &cfg);
        assert!((v - TERMINAL_EMPTY).abs() < 1e-9, "{v}");
    }

    // 0.8 * 18 * integral_0^0.8 dq / (0.8 + 1.32 q (1-q)^2), 30-digit mpmath quadrature
    const TERMINAL_EMPTY: f64 = 12.377_664_376_105_858;
}
