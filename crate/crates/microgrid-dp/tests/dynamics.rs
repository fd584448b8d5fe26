mod common;

use approx::assert_relative_eq;
use microgrid_dp::dynamics::{apply_noise, moments, transition_operator, NoiseVector};
use microgrid_dp::math::integrate;
use microgrid_dp::{Action, ModelConfig, State};
use proptest::prelude::*;

fn action() -> impl Strategy<Value = Action> {
    (0..7usize).prop_map(|i| Action::ALL[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn moments_are_well_formed(n in 0usize..168, z in -3.0f64..3.0, q in 0.0f64..1.0, g in 0.0f64..1.0, a in action()) {
        let cfg = ModelConfig::default();
        let m = moments(n, &State::new(z, q, g), a, &cfg);
        for v in [m.mean_z, m.var_z, m.mean_q, m.var_q, m.mean_g, m.var_g, m.cov_zq, m.rho_q, m.cov_zg, m.rho_g] {
            prop_assert!(v.is_finite());
        }
        prop_assert!(m.var_z > 0.0 && m.var_q >= 0.0 && m.var_g >= 0.0);
        prop_assert!(m.rho_q.abs() <= 1.0 && m.rho_g.abs() <= 1.0);
        prop_assert!(m.cov_zq * m.cov_zq <= m.var_z * m.var_q * (1.0 + 1e-12) + 1e-300);
        prop_assert!(m.cov_zg * m.cov_zg <= m.var_z * m.var_g * (1.0 + 1e-12) + 1e-300);
        // at most one controlled axis is random
        prop_assert!(m.var_q == 0.0 || m.var_g == 0.0);
    }

    #[test]
    fn demand_moments_ignore_the_action(n in 0usize..168, z in -3.0f64..3.0, q in 0.0f64..1.0, g in 0.0f64..1.0) {
        let cfg = ModelConfig::default();
        let x = State::new(z, q, g);
        let base = moments(n, &x, Action::Wait, &cfg);
        for a in Action::ALL {
            let m = moments(n, &x, a, &cfg);
            prop_assert_eq!(m.mean_z, base.mean_z);
            prop_assert_eq!(m.var_z, base.var_z);
        }
    }

    #[test]
    fn untouched_axes_only_decay(n in 0usize..168, z in -3.0f64..3.0, q in 0.0f64..1.0, g in 0.0f64..1.0, a in action()) {
        let cfg = ModelConfig::default();
        let m = moments(n, &State::new(z, q, g), a, &cfg);
        let dt = cfg.step_length();
        if !a.is_generator() {
            prop_assert_eq!(m.mean_g, g);
            prop_assert_eq!(m.var_g, 0.0);
        }
        if !a.is_battery() {
            prop_assert!((m.mean_q - q * (-cfg.battery.eta0 * dt).exp()).abs() < 1e-15);
            prop_assert_eq!(m.var_q, 0.0);
        }
        if a.is_generator() {
            prop_assert!(m.mean_g < g || a == Action::FuelFull);
        }
    }

    #[test]
    fn zero_noise_gives_the_mean(n in 0usize..168, z in -3.0f64..3.0, q in 0.0f64..1.0, g in 0.0f64..1.0, a in action()) {
        let cfg = ModelConfig::default();
        let x = State::new(z, q, g);
        let m = moments(n, &x, a, &cfg);
        let y = apply_noise(&m, &NoiseVector::default());
        prop_assert_eq!((y.z, y.q, y.g), (m.mean_z, m.mean_q, m.mean_g));
        let y2 = transition_operator(n, &x, a, &NoiseVector::default(), &cfg);
        prop_assert_eq!(y, y2);
    }
}

// With vanishing demand noise the battery mean is the solution of the
// deterministic ODE with frozen efficiency; compare to quadrature.
#[test]
fn deterministic_battery_mean() {
    let mut cfg = ModelConfig::default();
    cfg.demand.sigma = 1e-12;
    let (n, z, q) = (3, 0.7, 0.6);
    let x = State::new(z, q, 0.5);
    let dt = cfg.step_length();
    let b = &cfg.battery;
    let mu = cfg.seasonal_mean(n);
    let eff = microgrid_dp::dynamics::efficiency(cfg.time(n), z, q, &cfg);
    let beta = cfg.demand.beta;
    let forcing = integrate(
        |s| (-b.eta0 * (dt - s)).exp() * (mu + z * (-beta * s).exp()),
        0.0,
        dt,
        1e-13,
    );
    let expected = q * (-b.eta0 * dt).exp() - eff / b.capacity * forcing;
    let m = moments(n, &x, Action::DischargeFull, &cfg);
    assert_relative_eq!(m.mean_q, expected, max_relative = 1e-12);
    assert!(m.var_q < 1e-20);
}

#[test]
fn generator_full_mean_is_affine_in_demand() {
    let cfg = ModelConfig::default();
    let x0 = moments(5, &State::new(0.0, 0.5, 0.8), Action::FuelFull, &cfg);
    let x1 = moments(5, &State::new(1.0, 0.5, 0.8), Action::FuelFull, &cfg);
    let x2 = moments(5, &State::new(2.0, 0.5, 0.8), Action::FuelFull, &cfg);
    assert_relative_eq!(x2.mean_g - x1.mean_g, x1.mean_g - x0.mean_g, max_relative = 1e-12);
    assert!(x1.mean_g < x0.mean_g);
    assert_eq!(x0.var_g, x1.var_g);
}
