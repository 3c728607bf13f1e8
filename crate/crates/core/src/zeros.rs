//! Zero counting on `|z| < r` by the argument principle.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use serde::Serialize;

use crate::asymptotics::power_set;
use crate::error::{precondition, Result};
use crate::model::CoefficientModel;
use crate::numerics::wrap_angle;
use crate::sampler::{SampleDraw, ScaledSeries};

pub const MAX_DEPTH: u32 = 40;

/// Scaled sums below this fraction of `sum |c_n|` are indistinguishable from
/// cancellation noise and make a draw ambiguous.
const FLOAT_FLOOR: f64 = 1e-12;

/// Default ambiguity margin for a plan with sup-norm tail budget `eps_tail`.
pub fn default_margin(eps_tail: f64) -> f64 {
    (1e3 * eps_tail).ln()
}

#[derive(Debug, Clone, Serialize)]
pub struct ContourScan {
    pub r: f64,
    pub count: i64,
    pub min_log_modulus: f64,
    pub refinements: u64,
    pub ambiguous: bool,
    /// Accumulated phase change around the contour.
    pub total_phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HoleState {
    Hole,
    NotHole,
    Ambiguous,
}

/// Per-radius data shared by every draw counted on the same contour.
#[derive(Debug, Clone)]
pub struct Contour {
    pub r: f64,
    pub margin: f64,
    weights: Vec<f64>,
    max_n: usize,
}

impl Contour {
    pub fn new(model: &CoefficientModel, r: f64, k: usize, margin: f64) -> Result<Self> {
        let max_n = power_set(model, r)?.set.last().copied().unwrap_or(0);
        let weights = (0..=k).map(|n| model.log_weight(n, r)).collect();
        Ok(Contour { r, margin, weights, max_n })
    }

    fn initial_points(&self) -> usize {
        let k = self.weights.len() - 1;
        8 * (self.max_n + k / 4 + 4)
    }

    pub fn scan(&self, sample: &SampleDraw) -> Result<ContourScan> {
        self.scan_with_points(sample, self.initial_points())
    }

    /// As [`Contour::scan`] with an explicit initial grid size.
    pub fn scan_with_points(&self, sample: &SampleDraw, points: usize) -> Result<ContourScan> {
        if sample.radius < self.r * (1.0 - 1e-12) {
            return precondition(format!("contour radius {} exceeds the planned radius {}", self.r, sample.radius));
        }
        if sample.xi.len() != self.weights.len() {
            return precondition(format!(
                "sample has {} coefficients, contour was built for {}",
                sample.xi.len(),
                self.weights.len()
            ));
        }
        let series = ScaledSeries::new(&sample.xi, &self.weights, self.r);
        Ok(count(&series, points.max(4), self.margin))
    }
}

#[derive(Clone, Copy)]
struct Point {
    phi: f64,
    arg: f64,
}

fn count(series: &ScaledSeries, points: usize, margin: f64) -> ContourScan {
    let r = series.rho;
    if series.is_zero() {
        return ContourScan {
            r,
            count: 0,
            min_log_modulus: f64::NEG_INFINITY,
            refinements: 0,
            ambiguous: true,
            total_phase: 0.0,
        };
    }
    let floor = FLOAT_FLOOR * series.abs_sum;
    let mut min_abs = f64::INFINITY;
    let mut sample_at = |phi: f64| {
        let v = series.eval(phi);
        let a = v.norm();
        min_abs = min_abs.min(a);
        Point { phi, arg: arg_of(v) }
    };

    let mut total = 0.0;
    let mut refinements = 0u64;
    let mut too_deep = false;
    let mut stack: Vec<(Point, Point, u32)> = Vec::new();
    let first = sample_at(0.0);
    let mut prev = Point { phi: first.phi, arg: first.arg };
    for k in 1..=points {
        let next = if k == points {
            Point { phi: TAU, arg: first.arg }
        } else {
            sample_at(TAU * k as f64 / points as f64)
        };
        let end = Point { phi: next.phi, arg: next.arg };
        stack.push((prev, next, 0));
        while let Some((a, b, depth)) = stack.pop() {
            let d = wrap_angle(b.arg - a.arg);
            if d.abs() <= FRAC_PI_2 {
                total += d;
                continue;
            }
            if depth >= MAX_DEPTH {
                too_deep = true;
                total += d;
                continue;
            }
            refinements += 1;
            let mid = sample_at(0.5 * (a.phi + b.phi));
            let mid_copy = Point { phi: mid.phi, arg: mid.arg };
            // right half first so the left half is summed first
            stack.push((mid_copy, b, depth + 1));
            stack.push((a, mid, depth + 1));
        }
        prev = end;
    }

    let min_log_modulus = series.log_scale + min_abs.ln();
    let ambiguous = too_deep || min_log_modulus < margin || min_abs < floor;
    ContourScan {
        r,
        count: (total / TAU).round() as i64,
        min_log_modulus,
        refinements,
        ambiguous,
        total_phase: total,
    }
}

fn arg_of(v: Complex64) -> f64 {
    v.im.atan2(v.re)
}

pub fn winding_count(sample: &SampleDraw, model: &CoefficientModel, r: f64, margin: f64) -> Result<ContourScan> {
    Contour::new(model, r, sample.k(), margin)?.scan(sample)
}

pub fn classify(scan: &ContourScan) -> HoleState {
    match (scan.ambiguous, scan.count) {
        (true, _) => HoleState::Ambiguous,
        (false, 0) => HoleState::Hole,
        _ => HoleState::NotHole,
    }
}

pub fn hole_indicator(sample: &SampleDraw, model: &CoefficientModel, r: f64, margin: f64) -> Result<HoleState> {
    Ok(classify(&winding_count(sample, model, r, margin)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Encodes a polynomial with monic coefficients `p` as a model plus a
    /// pinned draw: `log a_n = ln|p_n|`, `xi_n = p_n / |p_n|`, and `a_0 = 1`
    /// with `xi_0 = p_0`.
    fn pinned(p: &[Complex64], radius: f64) -> (CoefficientModel, SampleDraw) {
        let mut log_a = vec![0.0];
        let mut xi = vec![p[0]];
        for v in &p[1..] {
            if *v == Complex64::ZERO {
                log_a.push(f64::NEG_INFINITY);
                xi.push(Complex64::ZERO);
            } else {
                log_a.push(v.norm().ln());
                xi.push(v / v.norm());
            }
        }
        let model = CoefficientModel::explicit_table(log_a).unwrap();
        (model, SampleDraw::from_coefficients(radius, xi))
    }

    fn from_roots(roots: &[Complex64]) -> Vec<Complex64> {
        let mut p = vec![c(1.0, 0.0)];
        for root in roots {
            let mut next = vec![Complex64::ZERO; p.len() + 1];
            for (i, coef) in p.iter().enumerate() {
                next[i + 1] += coef;
                next[i] -= coef * root;
            }
            p = next;
        }
        p
    }

    #[test]
    fn constant_has_no_zeros() {
        let (model, s) = pinned(&[c(1.0, 0.0), Complex64::ZERO, Complex64::ZERO], 1.0);
        let scan = winding_count(&s, &model, 1.0, f64::NEG_INFINITY).unwrap();
        assert_eq!(scan.count, 0);
        assert!(!scan.ambiguous);
        assert_eq!(classify(&scan), HoleState::Hole);
    }

    #[test]
    fn monomial_has_full_multiplicity() {
        let mut p = vec![Complex64::ZERO; 6];
        p[5] = c(1.0, 0.0);
        let (model, s) = pinned(&p, 1.0);
        let scan = winding_count(&s, &model, 1.0, f64::NEG_INFINITY).unwrap();
        assert_eq!(scan.count, 5);
        assert!((scan.total_phase - 5.0 * TAU).abs() < 1e-6);
    }

    #[test]
    fn placed_roots() {
        let p = from_roots(&[c(0.5, 0.0), c(3.0, 0.0)]);
        let (model, s) = pinned(&p, 1.0);
        assert_eq!(winding_count(&s, &model, 1.0, f64::NEG_INFINITY).unwrap().count, 1);
    }

    #[test]
    fn linear_hole_states() {
        let model = CoefficientModel::explicit_table(vec![0.0, 0.0]).unwrap();
        let s = SampleDraw::from_coefficients(2.0, vec![c(1.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(hole_indicator(&s, &model, 2.0, -30.0).unwrap(), HoleState::NotHole);
        assert_eq!(hole_indicator(&s, &model, 0.5, -30.0).unwrap(), HoleState::Hole);
        // root exactly on the contour
        assert_eq!(hole_indicator(&s, &model, 1.0, -30.0).unwrap(), HoleState::Ambiguous);
    }

    #[test]
    fn contour_beyond_plan_is_rejected() {
        let model = CoefficientModel::explicit_table(vec![0.0, 0.0]).unwrap();
        let s = SampleDraw::from_coefficients(1.0, vec![c(1.0, 0.0), c(1.0, 0.0)]);
        assert!(winding_count(&s, &model, 2.0, -30.0).is_err());
    }

    #[test]
    fn random_placed_roots_match_exactly() {
        let mut rng = stream(2024, 0);
        for trial in 0..1000 {
            let degree = rng.random_range(1..=8);
            let mut roots = Vec::new();
            let mut inside = 0;
            while roots.len() < degree {
                let rad: f64 = rng.random_range(0.0..2.0);
                if (rad - 1.0).abs() < 1e-3 {
                    continue;
                }
                let phi: f64 = rng.random_range(0.0..TAU);
                if rad < 1.0 {
                    inside += 1;
                }
                roots.push(Complex64::from_polar(rad, phi));
            }
            let p = from_roots(&roots);
            let (model, s) = pinned(&p, 1.0);
            let scan = winding_count(&s, &model, 1.0, f64::NEG_INFINITY).unwrap();
            assert!(!scan.ambiguous, "trial {trial}: {roots:?}");
            assert_eq!(scan.count, inside, "trial {trial}: {roots:?}");
            assert!((scan.total_phase - TAU * inside as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn rotation_and_refinement_invariance() {
        use crate::sampler::{draw, truncation_plan};
        let model = CoefficientModel::gamma_power(0.5).unwrap();
        let plan = truncation_plan(&model, 2.0, 1e-9, 1e-12).unwrap();
        let margin = default_margin(plan.eps_tail);
        let contour = Contour::new(&model, 2.0, plan.k, margin).unwrap();
        for stream_id in 0..200 {
            let s = draw(&plan, 5, stream_id);
            let base = contour.scan(&s).unwrap();
            if base.ambiguous {
                continue;
            }
            let alpha = 0.37 + stream_id as f64;
            let rotated_xi = s
                .xi
                .iter()
                .enumerate()
                .map(|(n, x)| x * Complex64::from_polar(1.0, alpha * n as f64))
                .collect();
            let rotated = SampleDraw::from_coefficients(s.radius, rotated_xi);
            assert_eq!(contour.scan(&rotated).unwrap().count, base.count);
            let fine = contour.scan_with_points(&s, 4 * contour.initial_points()).unwrap();
            assert_eq!(fine.count, base.count);
        }
    }
}
