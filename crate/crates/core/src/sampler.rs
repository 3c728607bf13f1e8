//! Realizations of the random coefficients and scaled evaluation of `f`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::asymptotics::power_set;
use crate::error::{domain, precondition, Error, Result};
use crate::model::CoefficientModel;
use crate::rng::{complex_gaussian, stream};

/// Truncation of the series at index `k` with an explicit failure budget.
///
/// For `n > k` the coefficient thresholds are
/// `tau_n = sqrt(ln((n-k)^2 pi^2 / (6 eps_fail)))`, so
/// `sum_{n>k} P(|xi_n| > tau_n) = eps_fail` exactly, and `k` is the least
/// index at or above `max N(r)` with `sum_{n>k} a_n r^n tau_n <= eps_tail`.
/// On the complement of the failure event the discarded tail is at most
/// `eps_tail` on the closed disk of radius `r`.
#[derive(Debug, Clone, Serialize)]
pub struct TruncationPlan {
    pub r: f64,
    pub k: usize,
    pub eps_tail: f64,
    pub eps_fail: f64,
    /// Rigorous upper bound on `sum_{n>k} a_n r^n tau_n` (explicit sum plus
    /// geometric remainder).
    pub tail_bound: f64,
    /// `sum_{n>k} exp(-tau_n^2)`; equals `eps_fail` for infinite supports
    /// and 0 for finite ones.
    pub fail_bound: f64,
}

impl TruncationPlan {
    /// `tau_n` for `n > k`.
    pub fn threshold(&self, n: usize) -> Option<f64> {
        (n > self.k).then(|| tail_threshold(n - self.k, self.eps_fail))
    }
}

fn tail_threshold(offset: usize, eps_fail: f64) -> f64 {
    let j = offset as f64;
    ((j * j * PI * PI) / (6.0 * eps_fail)).ln().sqrt()
}

const TAIL_TERMS_MAX: usize = 10_000_000;

/// Upper bound on `sum_{j>=1} exp(w_{k+j}(r)) tau_j`.
///
/// Terms use the actual coefficients; once the concave envelope is
/// decreasing and the term ratio `q` has dropped below one, the rest is
/// bounded by the geometric series `term * q / (1 - q)`.
fn tail_sum(model: &CoefficientModel, r: f64, k: usize, eps_fail: f64, target: f64) -> Result<f64> {
    let ln_r = r.ln();
    let env = |n: usize| model.log_envelope(n) + n as f64 * ln_r;
    let mut total = 0.0;
    for j in 1..TAIL_TERMS_MAX {
        let n = k + j;
        let w = model.log_weight(n, r);
        let tau = tail_threshold(j, eps_fail);
        if w > f64::NEG_INFINITY {
            total += (w + tau.ln()).exp();
        }
        let e_now = env(n);
        let e_next = env(n + 1);
        if e_next < e_now {
            let ratio = (e_next - e_now).exp() * tail_threshold(j + 1, eps_fail) / tau;
            if ratio < 1.0 {
                let env_next_term = (e_next + tail_threshold(j + 1, eps_fail).ln()).exp();
                let remainder = env_next_term / (1.0 - ratio);
                if remainder <= 1e-3 * target || remainder == 0.0 {
                    return Ok(total + remainder);
                }
            }
        }
    }
    Err(Error::PlanConstruction(format!(
        "tail of {} at r = {r} did not settle within {TAIL_TERMS_MAX} terms",
        model.label()
    )))
}

/// Finite supports are truncated exactly at their degree for any `r > 0`;
/// infinite supports need `r >= 1`.
pub fn truncation_plan(model: &CoefficientModel, r: f64, eps_tail: f64, eps_fail: f64) -> Result<TruncationPlan> {
    let finite = model.degree().is_some();
    if !(r.is_finite() && if finite { r > 0.0 } else { r >= 1.0 }) {
        return domain(format!("truncation plan needs r >= 1 (r > 0 for finite supports), got {r}"));
    }
    if !(eps_tail > 0.0 && eps_tail <= 1.0) {
        return domain(format!("eps_tail must lie in (0, 1], got {eps_tail}"));
    }
    if !(eps_fail > 0.0 && eps_fail < 1.0) {
        return domain(format!("eps_fail must lie in (0, 1), got {eps_fail}"));
    }
    if let Some(degree) = model.degree() {
        return Ok(TruncationPlan { r, k: degree, eps_tail, eps_fail, tail_bound: 0.0, fail_bound: 0.0 });
    }
    let ps = power_set(model, r)?;
    let mut k = ps.set.last().copied().unwrap_or(0);
    loop {
        let bound = tail_sum(model, r, k, eps_fail, eps_tail)?;
        if bound <= eps_tail {
            return Ok(TruncationPlan { r, k, eps_tail, eps_fail, tail_bound: bound, fail_bound: eps_fail });
        }
        k += 1;
        if k > TAIL_TERMS_MAX {
            return Err(Error::PlanConstruction(format!("no truncation index found for {}", model.label())));
        }
    }
}

/// One realization of `(xi_0, ..., xi_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDraw {
    /// Radius the truncation was planned for.
    pub radius: f64,
    pub xi: Vec<Complex64>,
    /// Importance log-weight `log(dP/dQ)`; 0 for untilted draws.
    pub log_weight: f64,
    pub seed: u64,
    pub stream_id: u64,
}

impl SampleDraw {
    /// A draw with prescribed coefficients, for deterministic checks.
    pub fn from_coefficients(radius: f64, xi: Vec<Complex64>) -> Self {
        SampleDraw { radius, xi, log_weight: 0.0, seed: 0, stream_id: 0 }
    }

    pub fn k(&self) -> usize {
        self.xi.len() - 1
    }
}

/// Untilted draw; a pure function of `(seed, stream_id)`.
pub fn draw(plan: &TruncationPlan, seed: u64, stream_id: u64) -> SampleDraw {
    let mut rng = stream(seed, stream_id);
    let xi = (0..=plan.k).map(|_| complex_gaussian(&mut rng)).collect();
    SampleDraw { radius: plan.r, xi, log_weight: 0.0, seed, stream_id }
}

/// Coefficients `xi_n exp(w_n(rho) - log_scale)` with the scale chosen as the
/// largest term modulus, so evaluation never overflows.
#[derive(Debug, Clone)]
pub struct ScaledSeries {
    pub rho: f64,
    pub log_scale: f64,
    pub coeffs: Vec<Complex64>,
    /// `sum |coeffs|`, the floating-point noise reference for the sum; values
    /// below `1e-12` of it are treated as zeros.
    pub abs_sum: f64,
}

impl ScaledSeries {
    pub fn new(xi: &[Complex64], log_weights: &[f64], rho: f64) -> Self {
        debug_assert_eq!(xi.len(), log_weights.len());
        let log_terms: Vec<f64> = xi
            .iter()
            .zip(log_weights)
            .map(|(x, &w)| if *x == Complex64::ZERO { f64::NEG_INFINITY } else { w + x.norm().ln() })
            .collect();
        let log_scale = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if log_scale == f64::NEG_INFINITY {
            return ScaledSeries { rho, log_scale, coeffs: vec![Complex64::ZERO; xi.len()], abs_sum: 0.0 };
        }
        let coeffs: Vec<Complex64> = xi
            .iter()
            .zip(log_weights)
            .map(|(x, &w)| if w == f64::NEG_INFINITY { Complex64::ZERO } else { x * (w - log_scale).exp() })
            .collect();
        let abs_sum = coeffs.iter().map(|c| c.norm()).sum();
        ScaledSeries { rho, log_scale, coeffs, abs_sum }
    }

    pub fn for_sample(sample: &SampleDraw, model: &CoefficientModel, rho: f64) -> Self {
        let w: Vec<f64> = (0..sample.xi.len()).map(|n| model.log_weight(n, rho)).collect();
        Self::new(&sample.xi, &w, rho)
    }

    pub fn is_zero(&self) -> bool {
        self.log_scale == f64::NEG_INFINITY
    }

    /// `f(rho e^{i phi}) / e^{log_scale}` by Horner's rule on the unit circle.
    #[inline]
    pub fn eval(&self, phi: f64) -> Complex64 {
        let u = Complex64::from_polar(1.0, phi);
        self.coeffs.iter().rev().fold(Complex64::ZERO, |acc, c| acc * u + c)
    }

    /// Scaled `f` and `z f'(z)` at `rho e^{i phi}`.
    #[inline]
    pub fn eval_with_derivative(&self, phi: f64) -> (Complex64, Complex64) {
        let u = Complex64::from_polar(1.0, phi);
        let mut p = Complex64::ZERO;
        let mut q = Complex64::ZERO;
        for (n, c) in self.coeffs.iter().enumerate().rev() {
            p = p * u + c;
            q = q * u + c * n as f64;
        }
        (p, q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    /// `log|f(z)|`, `-inf` when the sum vanishes.
    pub log_modulus: f64,
    /// `arg f(z)`; `None` when the sum vanishes.
    pub phase: Option<f64>,
}

pub fn evaluate(sample: &SampleDraw, model: &CoefficientModel, z: Complex64) -> Result<Evaluation> {
    let rho = z.norm();
    if rho > sample.radius * (1.0 + 1e-12) {
        return precondition(format!("|z| = {rho} exceeds the planned radius {}", sample.radius));
    }
    let value = if rho == 0.0 {
        // f(0) = a_0 xi_0 = xi_0
        let x = sample.xi[0];
        if x == Complex64::ZERO {
            return Ok(Evaluation { log_modulus: f64::NEG_INFINITY, phase: None });
        }
        return Ok(Evaluation { log_modulus: x.norm().ln(), phase: Some(x.arg()) });
    } else {
        let series = ScaledSeries::for_sample(sample, model, rho);
        if series.is_zero() {
            return Ok(Evaluation { log_modulus: f64::NEG_INFINITY, phase: None });
        }
        (series.eval(z.arg()), series.log_scale)
    };
    let (p, scale) = value;
    if p == Complex64::ZERO {
        return Ok(Evaluation { log_modulus: f64::NEG_INFINITY, phase: None });
    }
    Ok(Evaluation { log_modulus: scale + p.norm().ln(), phase: Some(p.arg()) })
}

/// `log max |f|` over `grid_size` equally spaced points of `|z| = r`.
///
/// The grid values are one inverse DFT of the scaled coefficients folded
/// modulo `grid_size`, which is exact for any truncation length.
pub fn max_modulus(sample: &SampleDraw, model: &CoefficientModel, r: f64, grid_size: usize) -> Result<f64> {
    if r > sample.radius * (1.0 + 1e-12) {
        return precondition(format!("r = {r} exceeds the planned radius {}", sample.radius));
    }
    let min_grid = 8 * (power_set(model, r)?.set.last().copied().unwrap_or(0) + 1);
    if grid_size < min_grid {
        return precondition(format!("grid_size {grid_size} below 8 (max N(r) + 1) = {min_grid}"));
    }
    let series = ScaledSeries::for_sample(sample, model, r);
    if series.is_zero() {
        return Ok(f64::NEG_INFINITY);
    }
    let mut buf = vec![Complex64::ZERO; grid_size];
    for (n, c) in series.coeffs.iter().enumerate() {
        buf[n % grid_size] += c;
    }
    FftPlanner::new().plan_fft_inverse(grid_size).process(&mut buf);
    let peak = buf.iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok(series.log_scale + peak.ln())
}

/// `max_phi |d/dphi log|f(rho e^{i phi})|| = max |Im(z f'(z) / f(z))|` over
/// an equally spaced grid.
pub fn log_deriv_profile(sample: &SampleDraw, model: &CoefficientModel, rho: f64, grid_size: usize) -> Result<f64> {
    if !(rho > 0.0) || rho > sample.radius * (1.0 + 1e-12) {
        return precondition(format!("rho = {rho} must lie in (0, {}]", sample.radius));
    }
    if grid_size == 0 {
        return domain("grid_size must be positive");
    }
    let series = ScaledSeries::for_sample(sample, model, rho);
    if series.is_zero() {
        return Err(Error::ZeroOnContour { radius: rho, phi: 0.0 });
    }
    let mut best: f64 = 0.0;
    for k in 0..grid_size {
        let phi = TAU * k as f64 / grid_size as f64;
        let (p, q) = series.eval_with_derivative(phi);
        if p.norm() <= 1e-12 * series.abs_sum {
            return Err(Error::ZeroOnContour { radius: rho, phi });
        }
        best = best.max((q / p).im.abs());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn finite_supports_truncate_at_degree() {
        let plan = truncation_plan(&CoefficientModel::ConstantOnly, 5.0, 1e-6, 1e-9).unwrap();
        assert_eq!(plan.k, 0);
        assert_eq!(plan.tail_bound, 0.0);
        let table = CoefficientModel::explicit_table(vec![0.0, -1.0, -2.0, -3.0]).unwrap();
        assert_eq!(truncation_plan(&table, 2.0, 1e-6, 1e-9).unwrap().k, 3);
    }

    #[test]
    fn plan_invariants_by_direct_summation() {
        let model = CoefficientModel::gamma_power(0.5).unwrap();
        let (eps_tail, eps_fail) = (1e-6, 1e-9);
        let plan = truncation_plan(&model, 1.5, eps_tail, eps_fail).unwrap();
        assert!(plan.k >= 4);
        // direct sums over a long explicit range
        let det: f64 = (plan.k + 1..plan.k + 2000)
            .map(|n| (model.log_weight(n, 1.5)).exp() * plan.threshold(n).unwrap())
            .sum();
        let prob: f64 = (plan.k + 1..plan.k + 2_000_000)
            .map(|n| (-plan.threshold(n).unwrap().powi(2)).exp())
            .sum();
        assert!(det <= eps_tail, "{det}");
        assert!(det <= plan.tail_bound * (1.0 + 1e-12));
        assert!(prob <= eps_fail);
        // least such K
        let before: f64 = (plan.k..plan.k + 2000)
            .map(|n| (model.log_weight(n, 1.5)).exp() * tail_threshold(n - plan.k + 1, eps_fail))
            .sum();
        assert!(before > eps_tail);
        assert!(plan.threshold(plan.k).is_none());
    }

    #[test]
    fn plan_rejects_bad_budgets() {
        let model = CoefficientModel::gamma_power(0.5).unwrap();
        assert!(truncation_plan(&model, 1.5, 0.0, 1e-9).is_err());
        assert!(truncation_plan(&model, 1.5, 1e-6, 1.0).is_err());
        assert!(truncation_plan(&model, 0.5, 1e-6, 1e-9).is_err());
        let table = CoefficientModel::explicit_table(vec![0.0, 0.0]).unwrap();
        assert_eq!(truncation_plan(&table, 0.5, 1e-6, 1e-9).unwrap().k, 1);
    }

    #[test]
    fn draws_are_deterministic_per_stream() {
        let model = CoefficientModel::gamma_power(0.5).unwrap();
        let plan = truncation_plan(&model, 2.0, 1e-9, 1e-12).unwrap();
        assert_eq!(draw(&plan, 11, 5), draw(&plan, 11, 5));
        assert_ne!(draw(&plan, 11, 5).xi, draw(&plan, 11, 6).xi);
        assert_ne!(draw(&plan, 12, 5).xi, draw(&plan, 11, 5).xi);
    }

    #[test]
    fn evaluate_trivial_cases() {
        let model = CoefficientModel::gamma_power(0.5).unwrap();
        let mut xi = vec![Complex64::ZERO; 6];
        xi[0] = c(1.0, 0.0);
        let s = SampleDraw::from_coefficients(3.0, xi);
        let e = evaluate(&s, &model, Complex64::ZERO).unwrap();
        assert_eq!((e.log_modulus, e.phase), (0.0, Some(0.0)));

        let table = CoefficientModel::explicit_table(vec![0.0, -0.7]).unwrap();
        let s = SampleDraw::from_coefficients(2.0, vec![Complex64::ZERO, c(1.0, 0.0)]);
        let e = evaluate(&s, &table, c(2.0, 0.0)).unwrap();
        assert_relative_eq!(e.log_modulus, -0.7 + 2f64.ln(), epsilon = 1e-14);

        let zero = SampleDraw::from_coefficients(2.0, vec![Complex64::ZERO, Complex64::ZERO]);
        let e = evaluate(&zero, &table, c(1.0, 1.0)).unwrap();
        assert_eq!(e.log_modulus, f64::NEG_INFINITY);
        assert_eq!(e.phase, None);

        assert!(evaluate(&s, &table, c(3.0, 0.0)).is_err());
    }

    #[test]
    fn scaling_shifts_log_modulus() {
        let w = vec![0.0, 0.3, -0.2, 1.1];
        let xi = vec![c(0.3, -1.0), c(0.5, 0.2), c(-1.4, 0.1), c(0.2, 0.9)];
        let shift = 137.25;
        let shifted: Vec<f64> = w.iter().map(|x| x + shift).collect();
        let a = ScaledSeries::new(&xi, &w, 1.0);
        let b = ScaledSeries::new(&xi, &shifted, 1.0);
        for &phi in &[0.0, 0.7, 2.0, 4.5] {
            let la = a.log_scale + a.eval(phi).norm().ln();
            let lb = b.log_scale + b.eval(phi).norm().ln();
            assert_relative_eq!(lb - la, shift, epsilon = 1e-11);
        }
    }

    #[test]
    fn max_modulus_of_constant_is_zero() {
        let model = CoefficientModel::gamma_power(0.5).unwrap();
        let plan = truncation_plan(&model, 2.0, 1e-9, 1e-12).unwrap();
        let mut xi = vec![Complex64::ZERO; plan.k + 1];
        xi[0] = c(1.0, 0.0);
        let s = SampleDraw::from_coefficients(2.0, xi);
        assert_eq!(max_modulus(&s, &model, 2.0, 128).unwrap(), 0.0);
        assert!(max_modulus(&s, &model, 2.0, 8).is_err());
    }

    #[test]
    fn max_modulus_matches_direct_grid_and_refines_monotonically() {
        let model = CoefficientModel::gamma_power(0.5).unwrap();
        let plan = truncation_plan(&model, 3.0, 1e-9, 1e-12).unwrap();
        for stream_id in 0..20 {
            let s = draw(&plan, 99, stream_id);
            let series = ScaledSeries::for_sample(&s, &model, 3.0);
            let g = 256;
            let direct = (0..g)
                .map(|k| series.eval(TAU * k as f64 / g as f64).norm())
                .fold(0.0, f64::max)
                .ln()
                + series.log_scale;
            let fft = max_modulus(&s, &model, 3.0, g).unwrap();
            assert_relative_eq!(fft, direct, epsilon = 1e-10);
            let finer = max_modulus(&s, &model, 3.0, 2 * g).unwrap();
            assert!(finer >= fft - 1e-12);
        }
    }

    #[test]
    fn log_deriv_profile_closed_form() {
        // f = 1 + z; d/dphi log|1 + rho e^{i phi}| = -rho sin(phi) / (1 + rho^2 + 2 rho cos(phi))
        let table = CoefficientModel::explicit_table(vec![0.0, 0.0]).unwrap();
        let s = SampleDraw::from_coefficients(1.0, vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let rho: f64 = 0.5;
        let g = 4096;
        let got = log_deriv_profile(&s, &table, rho, g).unwrap();
        let expected = (0..g)
            .map(|k| {
                let phi = TAU * k as f64 / g as f64;
                (rho * phi.sin() / (1.0 + rho * rho + 2.0 * rho * phi.cos())).abs()
            })
            .fold(0.0, f64::max);
        assert_relative_eq!(got, expected, max_relative = 1e-12);
        assert!(got <= 1.0);

        let constant = SampleDraw::from_coefficients(1.0, vec![c(1.0, 0.0), Complex64::ZERO]);
        assert_eq!(log_deriv_profile(&constant, &table, rho, 64).unwrap(), 0.0);

        // zero of 1 + z on |z| = 1 at phi = pi
        let hit = log_deriv_profile(&s, &table, 1.0, 2);
        assert!(matches!(hit, Err(Error::ZeroOnContour { .. })));
    }
}
