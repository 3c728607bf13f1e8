use std::f64::consts::TAU;

use gaf_hole::certificates::{omega_classes, omega_log_prob, OmegaClass};
use gaf_hole::estimators::{estimate_importance, estimate_naive, EstimatorOptions, TiltSchedule};
use gaf_hole::numerics::{clopper_pearson, CompensatedSum};
use gaf_hole::sampler::{draw, evaluate, log_deriv_profile, truncation_plan, ScaledSeries};
use gaf_hole::zeros::{hole_indicator, HoleState};
use gaf_hole::{CoefficientModel, Workers};
use num_complex::Complex64;

fn gamma_half() -> CoefficientModel {
    CoefficientModel::gamma_power(0.5).unwrap()
}

/// Term-by-term summation with compensated real and imaginary parts and no
/// rescaling.
fn direct_sum(xi: &[Complex64], model: &CoefficientModel, z: Complex64) -> Complex64 {
    let (mut re, mut im) = (CompensatedSum::new(), CompensatedSum::new());
    for (n, x) in xi.iter().enumerate() {
        let w = model.log_weight(n, z.norm());
        if w == f64::NEG_INFINITY {
            continue;
        }
        let t = x * Complex64::from_polar(w.exp(), n as f64 * z.arg());
        re.add(t.re);
        im.add(t.im);
    }
    Complex64::new(re.value(), im.value())
}

#[test]
fn evaluation_matches_summation_oracle() {
    let model = gamma_half();
    let plan = truncation_plan(&model, 3.0, 1e-10, 1e-12).unwrap();
    for i in 0..500 {
        let s = draw(&plan, 77, i);
        let z = Complex64::from_polar(3.0 * ((i % 7) as f64 + 1.0) / 7.0, 0.37 * i as f64);
        let got = evaluate(&s, &model, z).unwrap();
        let want = direct_sum(&s.xi, &model, z);
        // cancellation makes near-zeros ill-conditioned for any method
        let scale: f64 = s.xi.iter().enumerate().map(|(n, x)| x.norm() * model.log_weight(n, z.norm()).exp()).sum();
        if want.norm() < 1e-6 * scale {
            continue;
        }
        let rel = (got.log_modulus - want.norm().ln()).abs() / want.norm().ln().abs().max(1.0);
        assert!(rel <= 1e-10, "draw {i}: {} vs {}", got.log_modulus, want.norm().ln());
    }
}

#[test]
fn draws_follow_the_complex_gaussian_law() {
    let plan = truncation_plan(&CoefficientModel::ConstantOnly, 1.0, 1e-6, 1e-9).unwrap();
    let sq: Vec<f64> = (0..100_000).map(|i| draw(&plan, 3, i).xi[0].norm_sqr()).collect();
    let n = sq.len() as f64;
    let mean = sq.iter().sum::<f64>() / n;
    // Var |xi|^2 = 1 for a unit exponential
    assert!((mean - 1.0).abs() <= 3.0 / n.sqrt(), "{mean}");
    let phases: Vec<f64> = (0..100_000).map(|i| draw(&plan, 3, i).xi[0].arg()).collect();
    let upper = phases.iter().filter(|p| **p > 0.0).count() as u64;
    let (lo, hi) = clopper_pearson(upper, 100_000, 0.01);
    assert!(lo <= 0.5 && 0.5 <= hi);
}

#[test]
fn truncated_tail_stays_within_budget() {
    let model = gamma_half();
    let plan = truncation_plan(&model, 1.5, 1e-6, 1e-9).unwrap();
    let mut longer = plan.clone();
    longer.k += 50;
    let weights_short: Vec<f64> = (0..=plan.k).map(|n| model.log_weight(n, 1.5)).collect();
    let weights_long: Vec<f64> = (0..=longer.k).map(|n| model.log_weight(n, 1.5)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..10_000 {
        let long = draw(&longer, 8, i);
        let short = draw(&plan, 8, i);
        assert_eq!(&long.xi[..=plan.k], &short.xi[..]);
        let a = ScaledSeries::new(&short.xi, &weights_short, 1.5);
        let b = ScaledSeries::new(&long.xi, &weights_long, 1.5);
        for k in 0..64 {
            let phi = TAU * k as f64 / 64.0;
            let fa = a.eval(phi) * a.log_scale.exp();
            let fb = b.eval(phi) * b.log_scale.exp();
            worst = worst.max((fa - fb).norm());
        }
    }
    assert!(worst <= plan.eps_tail, "{worst}");
}

#[test]
fn both_estimators_cover_the_linear_law() {
    let model = CoefficientModel::explicit_table(vec![0.0, 0.0]).unwrap();
    let opts = EstimatorOptions { workers: Workers::single(), ..Default::default() };
    let r: f64 = 2.0;
    let truth = 1.0 / (1.0 + r * r);
    let mut schedule = TiltSchedule::identity(r);
    schedule.sigma[0] = 3.0;
    let (mut naive_cover, mut is_cover) = (0, 0);
    for rep in 0..100 {
        let a = estimate_naive(&model, r, 2000, 1000 + rep, &opts).unwrap();
        let b = estimate_importance(&model, r, 2000, 5000 + rep, &schedule, &opts).unwrap();
        naive_cover += (a.ci_lo <= truth && truth <= a.ci_hi) as u32;
        is_cover += (b.ci_lo <= truth && truth <= b.ci_hi) as u32;
    }
    assert!(naive_cover >= 95, "{naive_cover}");
    assert!(is_cover >= 95, "{is_cover}");
}

#[test]
fn omega_probability_matches_event_frequency() {
    let model = CoefficientModel::explicit_table(vec![0.0, 0.0, -0.5]).unwrap();
    let (r, c0) = (1.0, 1.0);
    let cert = omega_log_prob(&model, r, c0).unwrap();
    assert!(cert.log_prob.abs() <= 12.0);
    let classes = omega_classes(&model, r).unwrap();
    let plan = truncation_plan(&model, r, 1e-8, 1e-10).unwrap();
    let trials = 100_000u64;
    let hits = (0..trials)
        .filter(|&i| {
            let s = draw(&plan, 4, i);
            s.xi.iter().enumerate().all(|(n, x)| match classes.class(n) {
                OmegaClass::Constant => x.norm() >= classes.constant_floor(c0),
                OmegaClass::Free => true,
                _ => x.norm() <= classes.cap(n).unwrap(),
            })
        })
        .count() as u64;
    let (lo, hi) = clopper_pearson(hits, trials, 0.01);
    let p = cert.log_prob.exp();
    assert!(lo <= p && p <= hi, "{p} vs [{lo}, {hi}]");
}

#[test]
fn log_derivative_is_finite_on_hole_draws() {
    let model = gamma_half();
    let plan = truncation_plan(&model, 1.2, 1e-8, 1e-10).unwrap();
    let mut holes = 0;
    for i in 0..2000 {
        let s = draw(&plan, 6, i);
        if hole_indicator(&s, &model, 1.2, (1e-5f64).ln()).unwrap() == HoleState::Hole {
            holes += 1;
            let v = log_deriv_profile(&s, &model, 1.0, 512).unwrap();
            assert!(v.is_finite() && v >= 0.0);
        }
    }
    assert!(holes > 0);
}
