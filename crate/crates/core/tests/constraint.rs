//! G variants against piecewise closed forms.

use lpgnn_core::{ConstraintFunction, ConstraintVariant};
use proptest::prelude::*;

mod common;
use common::{closed_form, grid};

#[test]
fn grid_matches_closed_forms_exactly() {
    for eps in [0.0, 0.01, 0.1, 0.5] {
        for v in ConstraintVariant::ALL {
            let g = ConstraintFunction::new(v, eps);
            let xs = grid();
            let values = g.g_value(&xs);
            let derivs = g.g_derivative(&xs);
            for (i, &r) in xs.iter().enumerate() {
                let (value, deriv) = closed_form(v, eps, r);
                assert_eq!(values[i], value, "{v} eps={eps} r={r}");
                assert_eq!(derivs[i], deriv, "{v}' eps={eps} r={r}");
            }
        }
    }
}

#[test]
fn grid_axioms() {
    for eps in [0.01, 0.1] {
        for v in ConstraintVariant::ALL {
            let g = ConstraintFunction::new(v, eps);
            assert_eq!(g.value(0.0), 0.0);
            for r in grid() {
                if v.is_unilateral() {
                    assert!(g.value(r) >= 0.0);
                }
                if v.is_epsilon_insensitive() && r.abs() <= eps {
                    assert_eq!(g.value(r), 0.0);
                    assert_eq!(g.derivative(r), 0.0);
                }
            }
        }
    }
}

fn variant() -> impl Strategy<Value = ConstraintVariant> {
    prop::sample::select(ConstraintVariant::ALL.to_vec())
}

proptest! {
    #[test]
    fn unilateral_outputs_are_nonnegative(v in variant(), eps in 0.0..1.0f64, r in -1e3..1e3f64) {
        prop_assume!(v.is_unilateral());
        prop_assert!(ConstraintFunction::new(v, eps).value(r) >= 0.0);
    }

    #[test]
    fn flat_inside_the_band(v in variant(), eps in 1e-6..1.0f64, t in -1.0..1.0f64) {
        prop_assume!(v.is_epsilon_insensitive());
        let g = ConstraintFunction::new(v, eps);
        let r = t * eps;
        prop_assert_eq!(g.value(r), 0.0);
        prop_assert_eq!(g.derivative(r), 0.0);
    }

    #[test]
    fn derivative_matches_difference_away_from_kinks(v in variant(), eps in 0.0..0.5f64, r in -3.0..3.0f64) {
        let g = ConstraintFunction::new(v, eps);
        prop_assume!(g.kinks().iter().all(|k| (r - k).abs() > 1e-3));
        let h = 1e-6;
        let fd = (g.value(r + h) - g.value(r - h)) / (2.0 * h);
        prop_assert!((fd - g.derivative(r)).abs() < 1e-6);
    }
}
