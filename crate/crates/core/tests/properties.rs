use gaf_hole::asymptotics::{n_delta, radial_analysis, s_growth_audit};
use gaf_hole::sampler::{evaluate, SampleDraw};
use gaf_hole::CoefficientModel;
use num_complex::Complex64;
use proptest::prelude::*;

fn model_strategy() -> impl Strategy<Value = CoefficientModel> {
    prop_oneof![
        (0.2f64..2.5).prop_map(|a| CoefficientModel::gamma_power(a).unwrap()),
        Just(CoefficientModel::lacunary_powers_of_two()),
        proptest::collection::vec(-6.0f64..4.0, 1..10).prop_map(|tail| {
            let mut log_a = vec![0.0];
            log_a.extend(tail);
            CoefficientModel::explicit_table(log_a).unwrap()
        }),
    ]
}

/// `N(r)` for `a_n = (n!)^-alpha` ends near `e r^(1/alpha)`; small `alpha`
/// at large `r` would need gigabytes of weights.
fn tractable(model: &CoefficientModel, r: f64) -> bool {
    match model {
        CoefficientModel::GammaPower { alpha } => std::f64::consts::E * r.powf(1.0 / alpha) <= 1e6,
        _ => true,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn radial_quantities_are_monotone(model in model_strategy(), r in 1.0f64..30.0, factor in 1.0f64..2.0) {
        prop_assume!(tractable(&model, r * factor));
        let a = radial_analysis(&model, r).unwrap();
        let b = radial_analysis(&model, r * factor).unwrap();
        prop_assert!(b.s_weight >= a.s_weight - 1e-9 * a.s_weight.abs().max(1.0));
        prop_assert!(b.m_mass >= a.m_mass);
        prop_assert!(b.n_count >= a.n_count);
    }

    #[test]
    fn mass_dominates_triangular_number(model in model_strategy(), r in 1.0f64..60.0) {
        prop_assume!(tractable(&model, r));
        let a = radial_analysis(&model, r).unwrap();
        let n = a.n_count as u64;
        prop_assert!(a.m_mass >= n * n.saturating_sub(1) / 2);
    }

    #[test]
    fn negative_shift_is_a_smaller_radius(model in model_strategy(), r in 2.0f64..30.0, delta in 0.0f64..0.6) {
        prop_assume!(tractable(&model, r));
        let shifted = r * (-delta).exp();
        prop_assume!(shifted >= 1.0);
        let lhs = n_delta(&model, r, -delta).unwrap();
        let rhs = radial_analysis(&model, shifted).unwrap().power_set;
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn shrinking_costs_at_most_four_gamma_m(model in model_strategy(), r in 2.0f64..50.0, gamma in 0.001f64..0.499) {
        prop_assume!(tractable(&model, r));
        prop_assume!((1.0 - gamma) * r >= 1.0);
        let audit = s_growth_audit(&model, r, gamma).unwrap();
        prop_assert!(audit.pass, "{:?}", audit);
    }

    #[test]
    fn finite_support_matches_direct_polynomial(
        coeffs in proptest::collection::vec((-3.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..9),
        rho in 0.1f64..3.0,
        phi in 0.0f64..std::f64::consts::TAU,
    ) {
        let mut log_a = vec![0.0];
        log_a.extend(coeffs.iter().map(|c| c.0));
        let model = CoefficientModel::explicit_table(log_a.clone()).unwrap();
        let mut xi = vec![Complex64::new(0.7, -0.2)];
        xi.extend(coeffs.iter().map(|c| Complex64::new(c.1, c.2)));
        let sample = SampleDraw::from_coefficients(rho, xi.clone());
        let z = Complex64::from_polar(rho, phi);
        let direct: Complex64 = xi.iter().zip(&log_a).enumerate()
            .map(|(n, (x, la))| x * la.exp() * z.powu(n as u32))
            .sum();
        let got = evaluate(&sample, &model, z).unwrap();
        prop_assume!(direct.norm() > 1e-6);
        let expected = direct.norm().ln();
        prop_assert!((got.log_modulus - expected).abs() <= 1e-12 * expected.abs().max(1.0),
            "{} vs {}", got.log_modulus, expected);
    }
}
