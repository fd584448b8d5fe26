//! Parameter calibration: self-discharge, battery capacity, degradation cost
//! and generator consumption checks.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::math::{norm_quantile, ou_integral_kernel};
use crate::model::{ModelConfig, SeasonalOUParams};

/// Default discharge (night) window, 19:00 to 05:00 the next day [h].
pub const NIGHT_WINDOW: (f64, f64) = (19.0, 29.0);
/// Default charge (day) window, 06:00 to 18:00 [h].
pub const DAY_WINDOW: (f64, f64) = (6.0, 18.0);
/// Default confidence level of the capacity sizing.
pub const CAPACITY_CONFIDENCE: f64 = 0.975;

/// Rate that takes a full battery down to `q_star` in `hours` of idling.
pub fn self_discharge_rate(q_star: f64, hours: f64) -> Result<f64> {
    if !(q_star > 0.0 && q_star < 1.0) {
        return Err(Error::InvalidArgument(format!("q* = {q_star} must lie in (0,1)")));
    }
    if !(hours > 0.0) {
        return Err(Error::InvalidArgument(format!("duration {hours} must be positive")));
    }
    Ok(-q_star.ln() / hours)
}

/// Mean and variance of the integral of residual demand over [t1, t2] when
/// the deviation starts at `z1`.
pub fn demand_integral_moments(p: &SeasonalOUParams, t1: f64, t2: f64, z1: f64) -> (f64, f64) {
    let tau = t2 - t1;
    let sines = |amp: f64, period: f64, phase: f64| {
        amp * period / (2.0 * PI)
            * ((2.0 * PI * (t2 - phase) / period).sin() - (2.0 * PI * (t1 - phase) / period).sin())
    };
    let decay = tau * crate::math::expm1_ratio(-p.beta * tau);
    let mean = p.mean_level * tau
        + sines(p.annual_amplitude, p.annual_period, p.annual_phase)
        + sines(p.daily_amplitude, p.daily_period, p.daily_phase)
        + z1 * decay;
    let var = p.sigma * p.sigma / (2.0 * p.beta.powi(3)) * ou_integral_kernel(p.beta * tau);
    (mean, var)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityEstimate {
    pub charge: f64,
    pub discharge: f64,
    pub capacity: f64,
}

/// Capacity able to absorb the day surplus and cover the night shortfall
/// with confidence `p`. Efficiencies are taken at their peak state of charge.
pub fn battery_capacity(
    window_charge: (f64, f64),
    window_discharge: (f64, f64),
    p: f64,
    z1: f64,
    cfg: &ModelConfig,
) -> Result<CapacityEstimate> {
    for (name, (a, b)) in [("charge", window_charge), ("discharge", window_discharge)] {
        if !(b > a) {
            return Err(Error::InvalidArgument(format!("{name} window ({a}, {b}) is empty")));
        }
    }
    if !(p > 0.5 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence {p} must lie in (0.5, 1)")));
    }
    let zp = norm_quantile(p);
    let b = &cfg.battery;

    let (mc, vc) = demand_integral_moments(&cfg.demand, window_charge.0, window_charge.1, z1);
    // The day integral is a surplus (negative demand); size on its magnitude.
    let charge = b.charge_efficiency(b.charge_peak_soc()) * (-mc + zp * vc.sqrt());

    let (md, vd) = demand_integral_moments(&cfg.demand, window_discharge.0, window_discharge.1, z1);
    let discharge = (md + zp * vd.sqrt()) / b.discharge_efficiency(b.discharge_peak_soc());

    Ok(CapacityEstimate {
        charge,
        discharge,
        capacity: charge.max(discharge),
    })
}

/// Degradation cost per kWh such that the discounted worst-case throughput
/// cost over the lifetime `t0` equals the discounted replacement price.
pub fn degradation_cost(price: f64, t0: f64, rho: f64, max_abs_demand: f64) -> f64 {
    let x = rho * t0;
    // rho P e^{-x} / ((1 - e^{-x}) R) = rho P / (expm1(x) R)
    rho * price / (x.exp_m1() * max_abs_demand)
}

/// Replacement price giving a target degradation cost.
pub fn replacement_price_for(gamma: f64, t0: f64, rho: f64, max_abs_demand: f64) -> f64 {
    gamma / degradation_cost(1.0, t0, rho, max_abs_demand)
}

pub const IDLE_RANGE: (f64, f64) = (0.5, 1.0);
pub const LOAD_RANGE: (f64, f64) = (0.3, 0.5);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorCheck {
    pub passed: bool,
    pub warnings: Vec<String>,
}

/// Compare generator consumption with typical small diesel units.
pub fn check_generator_params(c0: f64, c1: f64) -> GeneratorCheck {
    let mut warnings = Vec::new();
    if !(IDLE_RANGE.0..=IDLE_RANGE.1).contains(&c0) {
        warnings.push(format!(
            "idle consumption c0 = {c0} l/h outside typical range [{}, {}]",
            IDLE_RANGE.0, IDLE_RANGE.1
        ));
    }
    if !(LOAD_RANGE.0..=LOAD_RANGE.1).contains(&c1) {
        warnings.push(format!(
            "load consumption c1 = {c1} l/kWh outside typical range [{}, {}]",
            LOAD_RANGE.0, LOAD_RANGE.1
        ));
    }
    GeneratorCheck {
        passed: warnings.is_empty(),
        warnings,
    }
}

/// Inputs of a calibration run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationInputs {
    pub q_star: f64,
    pub idle_hours: f64,
    pub window_charge: (f64, f64),
    pub window_discharge: (f64, f64),
    pub confidence: f64,
    pub z1: f64,
    pub replacement_price: f64,
    pub lifetime_h: f64,
    pub degradation_rho: f64,
    pub max_abs_demand: f64,
}

impl Default for CalibrationInputs {
    fn default() -> Self {
        let lifetime_h = 5.0 * 8760.0;
        let degradation_rho = 0.03 / 8760.0;
        let max_abs_demand = 3.0;
        Self {
            q_star: 0.98,
            idle_hours: 96.0,
            window_charge: DAY_WINDOW,
            window_discharge: NIGHT_WINDOW,
            confidence: CAPACITY_CONFIDENCE,
            z1: 0.0,
            replacement_price: replacement_price_for(0.05, lifetime_h, degradation_rho, max_abs_demand),
            lifetime_h,
            degradation_rho,
            max_abs_demand,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub eta0: f64,
    pub capacity_charge_kwh: f64,
    pub capacity_discharge_kwh: f64,
    pub capacity_kwh: f64,
    pub gamma_deg: f64,
    pub generator: GeneratorCheck,
    pub inputs: CalibrationInputs,
}

pub fn calibrate(cfg: &ModelConfig, inputs: &CalibrationInputs) -> Result<CalibrationReport> {
    let eta0 = self_discharge_rate(inputs.q_star, inputs.idle_hours)?;
    let cap = battery_capacity(
        inputs.window_charge,
        inputs.window_discharge,
        inputs.confidence,
        inputs.z1,
        cfg,
    )?;
    if !(inputs.replacement_price > 0.0 && inputs.lifetime_h > 0.0 && inputs.degradation_rho > 0.0 && inputs.max_abs_demand > 0.0) {
        return Err(Error::InvalidArgument("degradation inputs must be positive".into()));
    }
    Ok(CalibrationReport {
        eta0,
        capacity_charge_kwh: cap.charge,
        capacity_discharge_kwh: cap.discharge,
        capacity_kwh: cap.capacity,
        gamma_deg: degradation_cost(
            inputs.replacement_price,
            inputs.lifetime_h,
            inputs.degradation_rho,
            inputs.max_abs_demand,
        ),
        generator: check_generator_params(cfg.generator.idle_rate, cfg.generator.load_rate),
        inputs: inputs.clone(),
    })
}

impl CalibrationReport {
    /// Configuration with the calibrated battery and degradation parameters.
    pub fn apply(&self, cfg: &ModelConfig) -> ModelConfig {
        let mut out = cfg.clone();
        out.battery.eta0 = self.eta0;
        out.battery.capacity = self.capacity_kwh;
        out.costs.degradation = self.gamma_deg;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_discharge_examples() {
        let eta = self_discharge_rate(0.98, 96.0).unwrap();
        assert!((eta - 2.1044e-4).abs() < 5e-9);
        assert!((self_discharge_rate((-1.0f64).exp(), 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(self_discharge_rate(1.0 - 1e-12, 96.0).unwrap() < 1e-13);
        assert!(self_discharge_rate(1.0, 96.0).is_err());
    }

    #[test]
    fn zero_noise_capacity_is_deterministic_integral() {
        let mut cfg = ModelConfig::default();
        cfg.demand.sigma = 1e-300;
        cfg.demand.annual_amplitude = 0.0;
        cfg.demand.daily_amplitude = 0.0;
        cfg.demand.mean_level = 0.7;
        let c = battery_capacity((6.0, 18.0), (19.0, 29.0), 0.9, 0.0, &cfg).unwrap();
        let eta_d = cfg.battery.discharge_efficiency(cfg.battery.discharge_peak_soc());
        assert!((c.discharge - 0.7 * 10.0 / eta_d).abs() < 1e-12);
    }

    #[test]
    fn integral_variance_small_rate() {
        let p = SeasonalOUParams { beta: 1e-6, ..Default::default() };
        let tau: f64 = 10.0;
        let (_, v) = demand_integral_moments(&p, 0.0, tau, 0.0);
        let leading = p.sigma * p.sigma * tau.powi(3) / 3.0;
        // next term of the expansion is -sigma^2 beta tau^4 / 4
        let expected = leading - p.sigma * p.sigma * 1e-6 * tau.powi(4) / 4.0;
        assert!((v - expected).abs() < 1e-9 * leading);
    }

    #[test]
    fn reference_capacity() {
        let c = battery_capacity(DAY_WINDOW, NIGHT_WINDOW, CAPACITY_CONFIDENCE, 0.0, &ModelConfig::default()).unwrap();
        assert!((c.capacity - 18.0).abs() < 0.5, "{c:?}");
        assert_eq!(c.capacity, c.charge.max(c.discharge));
    }

    #[test]
    fn capacity_monotone_in_confidence() {
        let cfg = ModelConfig::default();
        let mut last = 0.0;
        for p in [0.6, 0.8, 0.9, 0.95, 0.99] {
            let c = battery_capacity(DAY_WINDOW, NIGHT_WINDOW, p, 0.0, &cfg).unwrap().capacity;
            assert!(c > last);
            last = c;
        }
    }

    #[test]
    fn degradation_examples() {
        let inputs = CalibrationInputs::default();
        let g = degradation_cost(inputs.replacement_price, inputs.lifetime_h, inputs.degradation_rho, 3.0);
        assert!((g - 0.05).abs() < 1e-12);
        let g2 = degradation_cost(2.0 * inputs.replacement_price, inputs.lifetime_h, inputs.degradation_rho, 3.0);
        assert!((g2 - 2.0 * g).abs() < 1e-15);
        assert!(degradation_cost(1000.0, 1e6, 0.03, 3.0) < 1e-300);
    }

    #[test]
    fn generator_ranges() {
        assert!(check_generator_params(0.5, 0.35).passed);
        assert!(!check_generator_params(0.1, 0.35).passed);
        assert!(check_generator_params(0.75, 0.5).passed);
    }

    #[test]
    fn calibrated_config_validates() {
        let cfg = ModelConfig::default();
        let report = calibrate(&cfg, &CalibrationInputs::default()).unwrap();
        report.apply(&cfg).validate().unwrap();
    }
}
