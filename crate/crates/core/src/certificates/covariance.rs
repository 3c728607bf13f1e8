use num_complex::Complex64;
use serde::Serialize;

use crate::asymptotics::power_set;
use crate::error::{domain, precondition, Error, Result};
use crate::model::CoefficientModel;
use crate::numerics::log_sum_exp;

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceAudit {
    pub rho: f64,
    pub points: usize,
    /// Highest series index kept.
    pub k: usize,
    pub columns: usize,
    /// `log s^2 = log sum_k exp(2 w_k(rho))` over the kept columns.
    pub log_s2: f64,
    pub log_det_normalized: f64,
    pub log_det_sigma: f64,
    #[serde(rename = "S")]
    pub s: f64,
    /// `log_det_sigma - S(rho)`.
    pub margin: f64,
    /// `log(sum_{k > K} exp(2 w_k) / s^2)`, the relative diagonal mass left out.
    pub neglected_log_mass: f64,
}

/// `log det Sigma` for `Sigma_ij = sum_{k <= K} (a_k rho^k)^2 e^(ik(theta_i - theta_j))`.
pub fn covariance_logdet(model: &CoefficientModel, rho: f64, angles: &[f64], k: usize) -> Result<CovarianceAudit> {
    let max_n = power_set(model, rho)?.set.last().copied().unwrap_or(0);
    if k < max_n {
        return precondition(format!("K = {k} is below max N(rho) = {max_n}"));
    }
    let columns: Vec<usize> = (0..=k).collect();
    covariance_logdet_columns(model, rho, angles, &columns)
}

/// As [`covariance_logdet`] with the series restricted to `columns`.
///
/// `Sigma = B* B` where `B_ki = a_k rho^k e^(-ik theta_i)`. Rows are scaled by
/// `1/s` (so `B* B` has unit diagonal), sorted by decreasing magnitude and
/// reduced by column-pivoted Householder QR; `log det = 2 sum log|R_jj|`.
pub fn covariance_logdet_columns(
    model: &CoefficientModel,
    rho: f64,
    angles: &[f64],
    columns: &[usize],
) -> Result<CovarianceAudit> {
    if !(rho > 0.0 && rho.is_finite()) {
        return domain(format!("rho must be positive, got {rho}"));
    }
    let n = angles.len();
    if n == 0 {
        return domain("at least one point is required");
    }
    let mut rows: Vec<(usize, f64)> = columns
        .iter()
        .map(|&k| (k, model.log_weight(k, rho)))
        .filter(|(_, w)| *w > f64::NEG_INFINITY)
        .collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let doubled: Vec<f64> = rows.iter().map(|(_, w)| 2.0 * w).collect();
    let log_s2 = log_sum_exp(&doubled);
    let half = 0.5 * log_s2;

    let mut b: Vec<Vec<Complex64>> = rows
        .iter()
        .map(|&(k, w)| {
            let scale = (w - half).exp();
            angles.iter().map(|&t| Complex64::from_polar(scale, -(k as f64) * t)).collect()
        })
        .collect();
    let log_det_normalized = pivoted_qr_log_det(&mut b, n)?;

    let s = power_set(model, rho)?.s;
    let log_det_sigma = n as f64 * log_s2 + log_det_normalized;
    let k = columns.iter().copied().max().unwrap_or(0);
    Ok(CovarianceAudit {
        rho,
        points: n,
        k,
        columns: rows.len(),
        log_s2,
        log_det_normalized,
        log_det_sigma,
        s,
        margin: log_det_sigma - s,
        neglected_log_mass: neglected(model, rho, k, log_s2),
    })
}

fn neglected(model: &CoefficientModel, rho: f64, k: usize, log_s2: f64) -> f64 {
    if model.degree().is_some_and(|d| d <= k) {
        return f64::NEG_INFINITY;
    }
    let ln_rho = rho.ln();
    let env = |n: usize| model.log_envelope(n) + n as f64 * ln_rho;
    let mut terms = Vec::new();
    for n in k + 1..k + 1_000_000 {
        terms.push(2.0 * model.log_weight(n, rho) - log_s2);
        if env(n + 1) < env(n) && 2.0 * env(n) - log_s2 < -745.0 {
            break;
        }
    }
    log_sum_exp(&terms)
}

/// Column-pivoted Householder QR on the `m x n` row-major matrix `a`,
/// returning `2 sum log|R_jj|`.
///
/// A pivot is rejected when elimination has cancelled its column to below
/// `64 n eps` of the column's original norm over the same rows; graded
/// matrices with genuinely tiny rows pass, coincident points do not.
fn pivoted_qr_log_det(a: &mut [Vec<Complex64>], n: usize) -> Result<f64> {
    let m = a.len();
    let tol = 64.0 * n as f64 * f64::EPSILON;
    let original: Vec<Vec<Complex64>> = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut log_det = 0.0;
    let norm_below = |a: &[Vec<Complex64>], j: usize, col: usize| -> f64 {
        let scale = (j..m).map(|i| a[i][col].norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        scale * (j..m).map(|i| (a[i][col] / scale).norm_sqr()).sum::<f64>().sqrt()
    };
    for j in 0..n {
        if j >= m {
            return Err(Error::ConditioningFailure { pivot: j, partial_log_det: log_det });
        }
        let (best, norm) = (j..n)
            .map(|c| (c, norm_below(a, j, c)))
            .fold((j, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best != j {
            for row in a.iter_mut() {
                row.swap(j, best);
            }
            perm.swap(j, best);
        }
        let reference = norm_below(&original, j, perm[j]);
        if !(norm > tol * reference) || !norm.is_normal() {
            return Err(Error::ConditioningFailure { pivot: j, partial_log_det: log_det });
        }
        log_det += 2.0 * norm.ln();

        // v = x - alpha e_1 with alpha = -e^{i arg x_0} |x|
        let x0 = a[j][j];
        let phase = if x0 == Complex64::ZERO { Complex64::ONE } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        let mut v: Vec<Complex64> = (j..m).map(|i| a[i][j]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for c in j..n {
            let dot: Complex64 = v.iter().enumerate().map(|(t, vi)| vi.conj() * a[j + t][c]).sum();
            let f = dot * (2.0 / vnorm2);
            for (t, vi) in v.iter().enumerate() {
                a[j + t][c] -= vi * f;
            }
        }
    }
    Ok(log_det)
}
