//! Model parameters, the action alphabet and the seasonal demand mean.
//!
//! Time is measured in hours everywhere. Defaults reproduce the reference
//! experiment: one week at hourly resolution.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

/// Seasonal Ornstein-Uhlenbeck residual demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeasonalOUParams {
    /// Mean-reversion speed [1/h].
    #[serde(rename = "beta_R")]
    pub beta: f64,
    /// Volatility [kW/sqrt(h)].
    #[serde(rename = "sigma_R")]
    pub sigma: f64,
    /// Long-term mean [kW].
    #[serde(rename = "mu0_R")]
    pub mean_level: f64,
    /// Annual amplitude [kW].
    #[serde(rename = "kappa1_R")]
    pub annual_amplitude: f64,
    /// Daily amplitude [kW].
    #[serde(rename = "kappa2_R")]
    pub daily_amplitude: f64,
    /// Annual phase shift [h].
    #[serde(rename = "t1_R")]
    pub annual_phase: f64,
    /// Daily phase shift [h].
    #[serde(rename = "t2_R")]
    pub daily_phase: f64,
    /// Annual period [h].
    #[serde(rename = "delta1")]
    pub annual_period: f64,
    /// Daily period [h].
    #[serde(rename = "delta2")]
    pub daily_period: f64,
}

impl Default for SeasonalOUParams {
    fn default() -> Self {
        Self {
            beta: 0.2,
            sigma: 0.45,
            mean_level: 0.1,
            annual_amplitude: 0.1,
            daily_amplitude: 1.0,
            annual_phase: 0.0,
            daily_phase: 0.0,
            annual_period: 365.0 * 24.0,
            daily_period: 24.0,
        }
    }
}

impl SeasonalOUParams {
    /// Deterministic seasonal mean of residual demand at time `t` [kW].
    pub fn seasonality(&self, t: f64) -> f64 {
        self.mean_level
            + self.annual_amplitude * (2.0 * PI * (t - self.annual_phase) / self.annual_period).cos()
            + self.daily_amplitude * (2.0 * PI * (t - self.daily_phase) / self.daily_period).cos()
    }

    /// Stationary variance sigma^2 / (2 beta).
    pub fn stationary_variance(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.beta)
    }
}

/// Battery capacity, self-discharge and efficiency curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryParams {
    /// Energy capacity [kWh].
    #[serde(rename = "capacity_CQ")]
    pub capacity: f64,
    /// Self-discharge rate [1/h].
    pub eta0: f64,
    /// Power served in limited discharge mode [kW].
    #[serde(rename = "R_Q0")]
    pub limited_power: f64,
    #[serde(rename = "C0_C")]
    pub charge_base: f64,
    #[serde(rename = "C1_C")]
    pub charge_gain: f64,
    #[serde(rename = "l_C")]
    pub charge_exp_low: f64,
    #[serde(rename = "m_C")]
    pub charge_exp_high: f64,
    #[serde(rename = "C0_D")]
    pub discharge_base: f64,
    #[serde(rename = "C1_D")]
    pub discharge_gain: f64,
    #[serde(rename = "l_D")]
    pub discharge_exp_low: f64,
    #[serde(rename = "m_D")]
    pub discharge_exp_high: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self {
            capacity: 18.0,
            eta0: 2.1044e-4,
            limited_power: 1.4118,
            charge_base: 0.8,
            charge_gain: 1.32,
            charge_exp_low: 1.0,
            charge_exp_high: 2.0,
            discharge_base: 0.8,
            discharge_gain: 1.32,
            discharge_exp_low: 2.0,
            discharge_exp_high: 1.0,
        }
    }
}

fn efficiency_curve(base: f64, gain: f64, l: f64, m: f64, q: f64) -> f64 {
    base + gain * q.powf(l) * (1.0 - q).powf(m)
}

/// Extremes of q^l (1-q)^m on [0,1] for l, m >= 1: zero at the ends, peak at l/(l+m).
fn shape_peak(l: f64, m: f64) -> f64 {
    let q = l / (l + m);
    q.powf(l) * (1.0 - q).powf(m)
}

impl BatteryParams {
    /// Charging efficiency at state of charge `q`.
    pub fn charge_efficiency(&self, q: f64) -> f64 {
        efficiency_curve(
            self.charge_base,
            self.charge_gain,
            self.charge_exp_low,
            self.charge_exp_high,
            q,
        )
    }

    /// Discharging efficiency at state of charge `q`.
    pub fn discharge_efficiency(&self, q: f64) -> f64 {
        efficiency_curve(
            self.discharge_base,
            self.discharge_gain,
            self.discharge_exp_low,
            self.discharge_exp_high,
            q,
        )
    }

    /// State of charge maximising the charging efficiency.
    pub fn charge_peak_soc(&self) -> f64 {
        self.charge_exp_low / (self.charge_exp_low + self.charge_exp_high)
    }

    /// State of charge maximising the discharging efficiency.
    pub fn discharge_peak_soc(&self) -> f64 {
        self.discharge_exp_low / (self.discharge_exp_low + self.discharge_exp_high)
    }
}

/// Diesel generator and fuel tank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    /// Tank volume [l].
    #[serde(rename = "capacity_CG")]
    pub capacity: f64,
    /// Idle consumption [l/h].
    #[serde(rename = "c0")]
    pub idle_rate: f64,
    /// Load-dependent consumption [l/kWh].
    #[serde(rename = "c1")]
    pub load_rate: f64,
    /// Power served in limited mode [kW].
    #[serde(rename = "R_G0")]
    pub limited_power: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            capacity: 20.0,
            idle_rate: 0.5,
            load_rate: 0.35,
            limited_power: 1.4118,
        }
    }
}

/// Prices, penalties and discounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostParams {
    /// Fuel price [EUR/l].
    #[serde(rename = "fuel_price_F0")]
    pub fuel_price: f64,
    /// Battery degradation cost [EUR/kWh].
    #[serde(rename = "gamma_deg")]
    pub degradation: f64,
    /// Discomfort coefficient [EUR/kWh^2].
    #[serde(rename = "k0")]
    pub discomfort: f64,
    /// Terminal penalty for a battery below the reference level [EUR/kWh].
    #[serde(rename = "gamma_pen_Q")]
    pub battery_penalty: f64,
    /// Terminal liquidation value of stored energy [EUR/kWh].
    #[serde(rename = "gamma_liq_Q")]
    pub battery_liquidation: f64,
    /// Terminal liquidation value of fuel [EUR/l].
    #[serde(rename = "gamma_liq_G")]
    pub fuel_liquidation: f64,
    /// Reference state of charge at the horizon.
    pub q_ref: f64,
    /// Discount rate [1/h].
    pub rho: f64,
    /// Discount the continuation value by e^(-rho dt) in the backward recursion.
    pub bellman_discount_continuation: bool,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            fuel_price: 1.5,
            degradation: 0.05,
            discomfort: 0.575,
            battery_penalty: 0.8,
            battery_liquidation: 0.0,
            fuel_liquidation: 1.25,
            q_ref: 0.8,
            rho: 0.03,
            bellman_discount_continuation: true,
        }
    }
}

/// Time grid, state grid resolution and chance-constraint tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationParams {
    /// Horizon [h].
    #[serde(rename = "horizon_T")]
    pub horizon: f64,
    /// Number of decision steps.
    #[serde(rename = "steps_N")]
    pub steps: usize,
    /// Sub-intervals on the demand axis (odd).
    #[serde(rename = "N_Z")]
    pub z_intervals: usize,
    /// Sub-intervals on the state-of-charge axis.
    #[serde(rename = "N_Q")]
    pub q_intervals: usize,
    /// Sub-intervals on the fuel axis.
    #[serde(rename = "N_G")]
    pub g_intervals: usize,
    /// Chance-constraint tolerance.
    pub epsilon: f64,
}

impl Default for DiscretizationParams {
    fn default() -> Self {
        Self {
            horizon: 168.0,
            steps: 168,
            z_intervals: 17,
            q_intervals: 10,
            g_intervals: 10,
            epsilon: 0.05,
        }
    }
}

/// Complete model configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub demand: SeasonalOUParams,
    pub battery: BatteryParams,
    pub generator: GeneratorParams,
    pub costs: CostParams,
    pub discretization: DiscretizationParams,
}

impl ModelConfig {
    /// Length of one decision step [h].
    pub fn step_length(&self) -> f64 {
        self.discretization.horizon / self.discretization.steps as f64
    }

    /// Number of decision steps.
    pub fn steps(&self) -> usize {
        self.discretization.steps
    }

    /// Time of step `n` [h].
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.step_length()
    }

    /// Seasonal mean of residual demand frozen over step `n`.
    pub fn seasonal_mean(&self, n: usize) -> f64 {
        self.demand.seasonality(self.time(n))
    }

    /// Residual demand r = mu_R(t_n) + z.
    pub fn residual_demand(&self, n: usize, z: f64) -> f64 {
        self.seasonal_mean(n) + z
    }

    /// Half-width of the demand truncation interval, three stationary standard deviations.
    pub fn z_bound(&self) -> f64 {
        3.0 * self.demand.stationary_variance().sqrt()
    }

    /// Spacing of the demand grid.
    pub fn z_spacing(&self) -> f64 {
        2.0 * self.z_bound() / self.discretization.z_intervals as f64
    }

    /// Residual demand within half a demand cell of zero forces the idle action.
    pub fn is_near_zero(&self, r: f64) -> bool {
        r.abs() < 0.5 * self.z_spacing()
    }

    /// Continuation discount applied in the backward recursion.
    pub fn continuation_discount(&self) -> f64 {
        if self.costs.bellman_discount_continuation {
            (-self.costs.rho * self.step_length()).exp()
        } else {
            1.0
        }
    }

    /// Check every parameter constraint, reporting all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        let mut check = |ok: bool, field: &'static str, constraint: &str| {
            if !ok {
                v.push(Violation {
                    field,
                    constraint: constraint.to_string(),
                });
            }
        };

        let d = &self.demand;
        check(d.beta.is_finite() && d.beta > 0.0, "beta_R", "must be positive");
        check(d.sigma.is_finite() && d.sigma > 0.0, "sigma_R", "must be positive");
        check(d.mean_level.is_finite(), "mu0_R", "must be finite");
        check(d.annual_amplitude.is_finite(), "kappa1_R", "must be finite");
        check(d.daily_amplitude.is_finite(), "kappa2_R", "must be finite");
        check(d.annual_phase.is_finite(), "t1_R", "must be finite");
        check(d.daily_phase.is_finite(), "t2_R", "must be finite");
        check(d.daily_period.is_finite() && d.daily_period > 0.0, "delta2", "must be positive");
        check(
            d.annual_period.is_finite() && d.annual_period > d.daily_period,
            "delta1",
            "must exceed delta2",
        );

        let b = &self.battery;
        check(b.capacity.is_finite() && b.capacity > 0.0, "capacity_CQ", "must be positive");
        check(b.eta0.is_finite() && b.eta0 >= 0.0, "eta0", "must be non-negative");
        check(b.limited_power.is_finite() && b.limited_power > 0.0, "R_Q0", "must be positive");
        check(b.charge_base > 0.0 && b.charge_base < 1.0, "C0_C", "must lie in (0,1)");
        check(b.discharge_base > 0.0 && b.discharge_base < 1.0, "C0_D", "must lie in (0,1)");
        check(b.charge_gain.is_finite(), "C1_C", "must be finite");
        check(b.discharge_gain.is_finite(), "C1_D", "must be finite");
        check(b.charge_exp_low >= 1.0, "l_C", "must be at least 1");
        check(b.charge_exp_high >= 1.0, "m_C", "must be at least 1");
        check(b.discharge_exp_low >= 1.0, "l_D", "must be at least 1");
        check(b.discharge_exp_high >= 1.0, "m_D", "must be at least 1");
        if b.charge_exp_low >= 1.0 && b.charge_exp_high >= 1.0 && b.charge_gain.is_finite() {
            let ext = b.charge_base + b.charge_gain * shape_peak(b.charge_exp_low, b.charge_exp_high);
            check(
                ext > 0.0 && ext <= 1.0,
                "C1_C",
                "charging efficiency must stay in (0,1] on [0,1]",
            );
        }
        if b.discharge_exp_low >= 1.0 && b.discharge_exp_high >= 1.0 && b.discharge_gain.is_finite()
        {
            let ext = b.discharge_base
                + b.discharge_gain * shape_peak(b.discharge_exp_low, b.discharge_exp_high);
            check(
                ext > 0.0 && ext <= 1.0,
                "C1_D",
                "discharging efficiency must stay in (0,1] on [0,1]",
            );
        }

        let g = &self.generator;
        check(g.capacity.is_finite() && g.capacity > 0.0, "capacity_CG", "must be positive");
        check(g.idle_rate.is_finite() && g.idle_rate >= 0.0, "c0", "must be non-negative");
        check(g.load_rate.is_finite() && g.load_rate > 0.0, "c1", "must be positive");
        check(g.limited_power.is_finite() && g.limited_power > 0.0, "R_G0", "must be positive");

        let c = &self.costs;
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        check(nonneg(c.fuel_price), "fuel_price_F0", "must be non-negative");
        check(nonneg(c.degradation), "gamma_deg", "must be non-negative");
        check(nonneg(c.discomfort), "k0", "must be non-negative");
        check(nonneg(c.battery_penalty), "gamma_pen_Q", "must be non-negative");
        check(nonneg(c.battery_liquidation), "gamma_liq_Q", "must be non-negative");
        check(nonneg(c.fuel_liquidation), "gamma_liq_G", "must be non-negative");
        check((0.0..=1.0).contains(&c.q_ref), "q_ref", "must lie in [0,1]");
        check(nonneg(c.rho), "rho", "must be non-negative");

        let s = &self.discretization;
        check(s.steps >= 1, "steps_N", "must be at least 1");
        check(s.horizon.is_finite() && s.horizon > 0.0, "horizon_T", "must be positive");
        check(s.z_intervals >= 2, "N_Z", "must be at least 2");
        check(s.z_intervals % 2 == 1, "N_Z", "must be odd so that zero is a cell boundary");
        check(s.q_intervals >= 2, "N_Q", "must be at least 2");
        check(s.g_intervals >= 2, "N_G", "must be at least 2");
        check(s.epsilon > 0.0 && s.epsilon < 0.5, "epsilon", "must lie in (0, 0.5)");

        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

/// Return the configuration unchanged if every invariant holds.
pub fn validate_config(cfg: ModelConfig) -> Result<ModelConfig> {
    cfg.validate()?;
    Ok(cfg)
}

/// Control alphabet in canonical (tie-break) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Overspill,
    Charge,
    Wait,
    DischargeLimited,
    DischargeFull,
    FuelLimited,
    FuelFull,
}

impl Action {
    pub const ALL: [Action; 7] = [
        Action::Overspill,
        Action::Charge,
        Action::Wait,
        Action::DischargeLimited,
        Action::DischargeFull,
        Action::FuelLimited,
        Action::FuelFull,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_battery(self) -> bool {
        matches!(
            self,
            Action::Charge | Action::DischargeFull | Action::DischargeLimited
        )
    }

    pub fn is_generator(self) -> bool {
        matches!(self, Action::FuelFull | Action::FuelLimited)
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Overspill => "overspill",
            Action::Charge => "charge",
            Action::Wait => "wait",
            Action::DischargeLimited => "discharge_limited",
            Action::DischargeFull => "discharge_full",
            Action::FuelLimited => "fuel_limited",
            Action::FuelFull => "fuel_full",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Action::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown action '{s}'")))
    }
}

/// Demand deviation z [kW], state of charge q and fuel level g.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub z: f64,
    pub q: f64,
    pub g: f64,
}

impl State {
    pub fn new(z: f64, q: f64, g: f64) -> Self {
        Self { z, q, g }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seasonality_reference_values() {
        let p = SeasonalOUParams::default();
        assert!((p.seasonality(0.0) - 1.2).abs() < 1e-12);
        // daily cosine at its trough, annual term cos(2*pi*12/8760)
        let expected = 0.1 + 0.1 * (2.0 * PI * 12.0 / 8760.0).cos() - 1.0;
        assert!((p.seasonality(12.0) - expected).abs() < 1e-12);
        assert!((p.seasonality(12.0) + 0.8).abs() < 5e-5);
    }

    #[test]
    fn constant_seasonality_without_amplitudes() {
        let p = SeasonalOUParams {
            annual_amplitude: 0.0,
            daily_amplitude: 0.0,
            ..Default::default()
        };
        for t in [0.0, 3.7, 100.0, 5000.0] {
            assert_eq!(p.seasonality(t), p.mean_level);
        }
    }

    #[test]
    fn daily_periodicity() {
        let p = SeasonalOUParams {
            annual_amplitude: 0.0,
            ..Default::default()
        };
        for k in 0..50 {
            let t = 0.37 * k as f64;
            assert!((p.seasonality(t) - p.seasonality(t + 24.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn efficiencies_in_unit_interval() {
        let b = BatteryParams::default();
        for i in 0..=100 {
            let q = i as f64 / 100.0;
            for e in [b.charge_efficiency(q), b.discharge_efficiency(q)] {
                assert!(e > 0.0 && e <= 1.0, "q={q} e={e}");
            }
        }
        assert_eq!(b.charge_efficiency(0.0), 0.8);
        assert_eq!(b.charge_efficiency(1.0), 0.8);
        let peak = 0.8 + 1.32 * 4.0 / 27.0;
        assert!((b.charge_efficiency(1.0 / 3.0) - peak).abs() < 1e-12);
    }

    #[test]
    fn defaults_validate() {
        let cfg = ModelConfig::default();
        let checked = validate_config(cfg.clone()).unwrap();
        assert_eq!(validate_config(checked.clone()).unwrap(), checked);
    }

    #[test]
    fn rejects_bad_fields() {
        let mut cfg = ModelConfig::default();
        cfg.demand.beta = 0.0;
        cfg.discretization.z_intervals = 16;
        match cfg.validate() {
            Err(Error::Validation(v)) => {
                let fields: Vec<_> = v.iter().map(|x| x.field).collect();
                assert!(fields.contains(&"beta_R"));
                assert!(fields.contains(&"N_Z"));
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_efficiency_above_one() {
        let mut cfg = ModelConfig::default();
        cfg.battery.charge_gain = 3.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn action_order_and_names() {
        for (i, a) in Action::ALL.iter().enumerate() {
            assert_eq!(a.index(), i);
            assert_eq!(a.name().parse::<Action>().unwrap(), *a);
            assert!(!(a.is_battery() && a.is_generator()));
        }
    }
}
