use microgrid_dp::constraints::{feasible_actions, Exclusion};
use microgrid_dp::{Action, ModelConfig, State};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1024))]

    #[test]
    fn sign_structure(n in 0usize..168, z in -3.0f64..3.0, q in 0.0f64..1.0, g in 0.0f64..1.0) {
        let cfg = ModelConfig::default();
        let set = feasible_actions(n, &State::new(z, q, g), &cfg);
        let r = cfg.residual_demand(n, z);
        prop_assert!(!set.is_empty());
        if cfg.is_near_zero(r) {
            prop_assert_eq!(set.iter().collect::<Vec<_>>(), vec![Action::Wait]);
        } else if r < 0.0 {
            prop_assert!(set.contains(Action::Overspill));
            prop_assert!(set.iter().all(|a| matches!(a, Action::Overspill | Action::Charge)));
        } else {
            prop_assert!(set.contains(Action::Wait));
            prop_assert!(!set.contains(Action::Charge) && !set.contains(Action::Overspill));
        }
        for a in Action::ALL {
            prop_assert_eq!(set.contains(a), set.exclusion(a).is_none());
        }
    }

    #[test]
    fn tighter_tolerance_shrinks_the_set(n in 0usize..168, z in -3.0f64..3.0, q in 0.0f64..1.0, g in 0.0f64..1.0, e1 in 0.001f64..0.5, e2 in 0.001f64..0.5) {
        let mut loose = ModelConfig::default();
        loose.discretization.epsilon = e1.max(e2);
        let mut tight = loose.clone();
        tight.discretization.epsilon = e1.min(e2);
        let x = State::new(z, q, g);
        prop_assert!(feasible_actions(n, &x, &tight).is_subset_of(&feasible_actions(n, &x, &loose)));
    }

    #[test]
    fn limited_modes_need_demand_above_threshold(n in 0usize..168, z in -3.0f64..3.0, q in 0.0f64..1.0, g in 0.0f64..1.0) {
        let cfg = ModelConfig::default();
        let set = feasible_actions(n, &State::new(z, q, g), &cfg);
        let r = cfg.residual_demand(n, z);
        if set.contains(Action::DischargeLimited) {
            prop_assert!(r >= cfg.battery.limited_power);
        }
        if set.contains(Action::FuelLimited) {
            prop_assert!(r >= cfg.generator.limited_power);
        }
    }
}

#[test]
fn full_battery_under_surplus_only_overspills() {
    let cfg = ModelConfig::default();
    // midday: seasonal mean is well below zero
    let set = feasible_actions(12, &State::new(0.0, 1.0, 0.5), &cfg);
    assert_eq!(set.iter().collect::<Vec<_>>(), vec![Action::Overspill]);
    assert_eq!(set.exclusion(Action::Charge), Some(Exclusion::BatteryOverflow));
}

#[test]
fn empty_storage_under_shortfall_waits() {
    let cfg = ModelConfig::default();
    let set = feasible_actions(0, &State::new(1.5, 0.0, 0.0), &cfg);
    assert_eq!(set.iter().collect::<Vec<_>>(), vec![Action::Wait]);
    assert_eq!(set.exclusion(Action::DischargeFull), Some(Exclusion::BatteryUnderflow));
    assert_eq!(set.exclusion(Action::FuelFull), Some(Exclusion::FuelUnderflow));
}
