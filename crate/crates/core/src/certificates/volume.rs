use rand::Rng;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::numerics::{clopper_pearson, compensated_sum};
use crate::parallel::Workers;
use crate::rng::{stream, AUX_STREAM_BASE};

const CHUNK: u64 = 1 << 16;

/// Monte Carlo audit of `vol{x in [0,t]^N : prod x_j <= s} <= s/(N-1)! log^N(t^N/s)`.
#[derive(Debug, Clone, Serialize)]
pub struct VolumeAudit {
    pub dim: u32,
    pub s: f64,
    pub t: f64,
    pub trials: u64,
    pub inside: u64,
    pub mc_volume: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn volume_bound_audit(dim: u32, s: f64, t: f64, trials: u64, seed: u64, workers: Workers) -> Result<VolumeAudit> {
    if !(s > 0.0 && t > 0.0 && s.is_finite() && t.is_finite()) {
        return domain(format!("s and t must be positive, got s = {s}, t = {t}"));
    }
    if dim == 0 {
        return domain("dimension must be at least 1");
    }
    let nf = dim as f64;
    let log_ratio = nf * t.ln() - s.ln();
    if log_ratio < nf * (1.0 - 1e-12) {
        return domain(format!("log(t^N / s) = {log_ratio} is below N = {dim}; the bound does not apply"));
    }
    let log_fact = compensated_sum((1..dim).map(|j| (j as f64).ln()));
    let bound = (s.ln() - log_fact + nf * log_ratio.ln()).exp();

    if dim == 1 {
        // the set is [0, min(s, t)]; no sampling needed
        let v = s.min(t);
        return Ok(VolumeAudit {
            dim,
            s,
            t,
            trials: 0,
            inside: 0,
            mc_volume: v,
            ci_lo: v,
            ci_hi: v,
            bound,
            pass: v <= bound * (1.0 + 1e-12),
        });
    }
    if trials == 0 {
        return domain("trials must be positive");
    }

    let chunks = trials.div_ceil(CHUNK);
    let counts = workers.map_indexed(chunks, |c| {
        let mut rng = stream(seed, AUX_STREAM_BASE + c);
        let len = CHUNK.min(trials - c * CHUNK);
        (0..len)
            .filter(|_| {
                let prod: f64 = (0..dim).map(|_| t * rng.random::<f64>()).product();
                prod <= s
            })
            .count() as u64
    });
    let inside: u64 = counts.iter().sum();
    let cube = t.powi(dim as i32);
    let (lo, hi) = clopper_pearson(inside, trials, 0.01);
    let ci_hi = cube * hi;
    Ok(VolumeAudit {
        dim,
        s,
        t,
        trials,
        inside,
        mc_volume: cube * inside as f64 / trials as f64,
        ci_lo: cube * lo,
        ci_hi,
        bound,
        pass: ci_hi <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// `vol = s sum_{k<N} L^k / k!`, `L = log(t^N / s)`, for `s <= t^N`.
    fn exact_volume(dim: u32, s: f64, t: f64) -> f64 {
        let l = dim as f64 * t.ln() - s.ln();
        let mut term = 1.0;
        let mut total = 0.0;
        for k in 0..dim {
            if k > 0 {
                term *= l / k as f64;
            }
            total += term;
        }
        s * total
    }

    #[test]
    fn one_dimension_boundary() {
        let a = volume_bound_audit(1, 1.0, std::f64::consts::E, 0, 0, Workers::single()).unwrap();
        assert_eq!(a.mc_volume, 1.0);
        assert_relative_eq!(a.bound, 1.0, epsilon = 1e-12);
        assert!(a.pass);
    }

    #[test]
    fn precondition_is_enforced() {
        assert!(volume_bound_audit(2, 1.0, 2.0, 100, 0, Workers::single()).is_err());
        assert!(volume_bound_audit(2, -1.0, 20.0, 100, 0, Workers::single()).is_err());
    }

    #[test]
    fn monte_carlo_covers_exact_volume() {
        let a = volume_bound_audit(2, 1.0, 10.0, 1_000_000, 3, Workers::default()).unwrap();
        let exact = exact_volume(2, 1.0, 10.0);
        assert!(a.ci_lo <= exact && exact <= a.ci_hi, "{a:?} vs {exact}");
        assert!(a.pass);
        assert_relative_eq!(a.bound, 100f64.ln().powi(2), epsilon = 1e-12);
    }
}
