use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::rng::{stream, uniform_phase, AUX_STREAM_BASE};

pub const MAX_POINTS: usize = 64;

/// Angles `theta_1..theta_n` on the circle of radius `rho` together with the
/// generalized Vandermonde determinant they achieve.
#[derive(Debug, Clone, Serialize)]
pub struct PointConfiguration {
    pub rho: f64,
    /// `j_1 < ... < j_{n-1}`; `j_0 = 0` is implicit.
    pub exponents: Vec<usize>,
    pub angles: Vec<f64>,
    /// `log|det U|`, `U_mk = e^(i j_k theta_m)`.
    pub log_absdet_unit: f64,
    /// `log|det A| = log|det U| + (sum j_k) log rho`.
    pub log_absdet: f64,
    pub tries_used: u32,
    pub structured: bool,
}

impl PointConfiguration {
    pub fn success(&self) -> bool {
        self.log_absdet_unit >= 0.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub max_tries: u32,
    pub seed: u64,
    /// Try equally spaced angles first when the exponents are distinct
    /// modulo `n`.
    pub structured_first: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { max_tries: 1000, seed: 0, structured_first: true }
    }
}

/// `log|det U|` for the full exponent list (including the leading 0).
pub fn log_abs_det_unit(angles: &[f64], exponents: &[usize]) -> f64 {
    let n = angles.len();
    debug_assert_eq!(n, exponents.len());
    let u = DMatrix::from_fn(n, n, |m, k| Complex64::from_polar(1.0, exponents[k] as f64 * angles[m]));
    let lu = u.lu();
    lu.u().diagonal().iter().map(|d| d.norm().ln()).sum()
}

pub fn vandermonde_search(rho: f64, exponents: &[usize], max_tries: u32, seed: u64) -> Result<PointConfiguration> {
    vandermonde_search_with(rho, exponents, SearchOptions { max_tries, seed, structured_first: true })
}

pub fn vandermonde_search_with(rho: f64, exponents: &[usize], opts: SearchOptions) -> Result<PointConfiguration> {
    if !(rho > 0.0 && rho.is_finite()) {
        return domain(format!("rho must be positive, got {rho}"));
    }
    if exponents.first() == Some(&0) || exponents.windows(2).any(|w| w[0] >= w[1]) {
        return domain("exponents must be positive and strictly increasing");
    }
    let n = exponents.len() + 1;
    if n > MAX_POINTS {
        return domain(format!("at most {MAX_POINTS} points are supported, got {n}"));
    }
    if opts.max_tries == 0 {
        return domain("max_tries must be positive");
    }
    let full: Vec<usize> = std::iter::once(0).chain(exponents.iter().copied()).collect();
    let log_rho_power = exponents.iter().sum::<usize>() as f64 * rho.ln();
    let config = |angles: Vec<f64>, tries_used, structured| {
        let log_absdet_unit = if n == 1 { 0.0 } else { log_abs_det_unit(&angles, &full) };
        PointConfiguration {
            rho,
            exponents: exponents.to_vec(),
            angles,
            log_absdet_unit,
            log_absdet: log_absdet_unit + log_rho_power,
            tries_used,
            structured,
        }
    };

    let mut residues: Vec<usize> = full.iter().map(|j| j % n).collect();
    residues.sort_unstable();
    residues.dedup();
    let mut tries = 0;
    let mut best: Option<PointConfiguration> = None;
    if opts.structured_first && residues.len() == n {
        tries += 1;
        let c = config((0..n).map(|m| TAU * m as f64 / n as f64).collect(), tries, true);
        if c.success() {
            return Ok(c);
        }
        best = Some(c);
    }
    while tries < opts.max_tries {
        let mut rng = stream(opts.seed, AUX_STREAM_BASE + tries as u64);
        tries += 1;
        let angles = (0..n).map(|_| uniform_phase(&mut rng)).collect();
        let c = config(angles, tries, false);
        if c.success() {
            return Ok(c);
        }
        if best.as_ref().is_none_or(|b| c.log_absdet_unit > b.log_absdet_unit) {
            best = Some(c);
        }
    }
    let mut best = best.expect("at least one try");
    best.tries_used = tries;
    Err(Error::SearchExhausted { best: Box::new(best) })
}
