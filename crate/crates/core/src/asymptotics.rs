//! Deterministic radial functionals of a coefficient model.
//!
//! With `w_n(r) = log(a_n r^n)`:
//!
//! * `N(r) = {n : w_n(r) >= 0}`, `n(r) = #N(r)`, `m(r) = sum of N(r)`,
//! * `S(r) = 2 * sum_{n in N(r)} w_n(r)`,
//! * `delta = m(r)^(-1/4)` and `N_delta(r) = {n : w_n(r) >= -delta * n}`.
//!
//! A radius is *normal* when `m(r e^-delta) > 3/4 m(r)` and
//! `m(r e^delta) < 5/4 m(r)`; radii with `m(r) = 0` are *degenerate*.

use serde::Serialize;

use crate::error::{domain, precondition, Error, Result};
use crate::model::CoefficientModel;
use crate::numerics::compensated_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalStatus {
    Normal,
    Exceptional,
    Degenerate,
}

impl NormalStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            NormalStatus::Normal => "normal",
            NormalStatus::Exceptional => "exceptional",
            NormalStatus::Degenerate => "degenerate",
        }
    }
}

/// Everything deterministic about one radius.
#[derive(Debug, Clone)]
pub struct RadialAnalysis {
    pub r: f64,
    /// `w_n(r)` for `n = 0..=scan_end`.
    pub weights: Vec<f64>,
    pub power_set: Vec<usize>,
    pub n_count: usize,
    pub m_mass: u64,
    pub s_weight: f64,
    /// `m^(-1/4)`; `None` when `m = 0`.
    pub delta: Option<f64>,
    pub normal_status: NormalStatus,
}

/// Flat serialization of [`RadialAnalysis`].
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RadialRecord {
    pub r: f64,
    pub n: usize,
    pub m: u64,
    #[serde(rename = "S")]
    pub s: f64,
    pub delta: Option<f64>,
    pub status: NormalStatus,
}

impl RadialAnalysis {
    pub fn record(&self) -> RadialRecord {
        RadialRecord {
            r: self.r,
            n: self.n_count,
            m: self.m_mass,
            s: self.s_weight,
            delta: self.delta,
            status: self.normal_status,
        }
    }

    pub fn max_index(&self) -> usize {
        self.power_set.last().copied().unwrap_or(0)
    }

    /// `w_n(r)` for an index inside the scan window, `-inf`-safe.
    pub fn weight(&self, n: usize) -> f64 {
        self.weights[n]
    }
}

/// `N(r)`, `m(r)`, `S(r)` without the normality classification. Valid for
/// any `r > 0` so shifted radii `r e^-delta < 1` can be evaluated.
#[derive(Debug, Clone)]
pub(crate) struct PowerSet {
    pub weights: Vec<f64>,
    pub set: Vec<usize>,
    pub m: u64,
    pub s: f64,
}

pub(crate) fn power_set(model: &CoefficientModel, r: f64) -> Result<PowerSet> {
    if !(r > 0.0 && r.is_finite()) {
        return domain(format!("radius must be positive and finite, got {r}"));
    }
    let cutoff = model.cutoff_hint(r)?;
    let weights: Vec<f64> = (0..=cutoff).map(|n| model.log_weight(n, r)).collect();
    // Finite supports end at their degree; otherwise the envelope guarantees
    // the last scanned weight is negative.
    if model.degree().is_none() && weights[cutoff] >= 0.0 {
        return Err(Error::SupportScanExhausted { r, index: cutoff });
    }
    let set: Vec<usize> = (0..=cutoff).filter(|&n| weights[n] >= 0.0).collect();
    let m = set.iter().map(|&n| n as u64).sum();
    let s = 2.0 * compensated_sum(set.iter().map(|&n| weights[n]));
    Ok(PowerSet { weights, set, m, s })
}

fn delta_of(m: u64) -> Option<f64> {
    (m > 0).then(|| (m as f64).powf(-0.25))
}

pub fn radial_analysis(model: &CoefficientModel, r: f64) -> Result<RadialAnalysis> {
    if !(r >= 1.0) {
        return domain(format!("radial analysis needs r >= 1, got {r}"));
    }
    let ps = power_set(model, r)?;
    let normality = classify(model, r, &ps)?;
    Ok(RadialAnalysis {
        r,
        n_count: ps.set.len(),
        m_mass: ps.m,
        s_weight: ps.s,
        delta: delta_of(ps.m),
        normal_status: normality.status,
        weights: ps.weights,
        power_set: ps.set,
    })
}

/// `N_delta(r) = {n : w_n(r) >= -delta n}` for any real `delta`.
pub fn n_delta(model: &CoefficientModel, r: f64, delta: f64) -> Result<Vec<usize>> {
    let reach = r * delta.max(0.0).exp();
    let cutoff = model.cutoff_hint(reach)?;
    Ok((0..=cutoff)
        .filter(|&n| model.log_weight(n, r) + delta * n as f64 >= 0.0)
        .collect())
}

/// `Ñ_delta(r) = N_delta(r) ∪ {n < sqrt(m)}`, restricted to the support of
/// the model, as a sorted list.
pub fn n_delta_tilde(model: &CoefficientModel, analysis: &RadialAnalysis) -> Result<Vec<usize>> {
    let Some(delta) = analysis.delta else {
        return precondition("Ñ_delta is undefined when m(r) = 0");
    };
    let mut set = n_delta(model, analysis.r, delta)?;
    let root_m = (analysis.m_mass as f64).sqrt();
    let mut n = 0usize;
    while (n as f64) < root_m {
        if model.ln_a(n) > f64::NEG_INFINITY {
            set.push(n);
        }
        n += 1;
    }
    set.sort_unstable();
    set.dedup();
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalityRecord {
    pub r: f64,
    pub status: NormalStatus,
    pub m: u64,
    pub delta: Option<f64>,
    /// `m(r e^-delta)` against `3/4 m(r)`.
    pub m_inner: u64,
    pub inner_rhs: f64,
    /// `m(r e^delta)` against `5/4 m(r)`.
    pub m_outer: u64,
    pub outer_rhs: f64,
}

fn classify(model: &CoefficientModel, r: f64, ps: &PowerSet) -> Result<NormalityRecord> {
    let m = ps.m;
    let Some(delta) = delta_of(m) else {
        return Ok(NormalityRecord {
            r,
            status: NormalStatus::Degenerate,
            m,
            delta: None,
            m_inner: 0,
            inner_rhs: 0.0,
            m_outer: 0,
            outer_rhs: 0.0,
        });
    };
    let m_inner = power_set(model, r * (-delta).exp())?.m;
    let m_outer = power_set(model, r * delta.exp())?.m;
    let inner_rhs = 0.75 * m as f64;
    let outer_rhs = 1.25 * m as f64;
    let normal = (m_inner as f64) > inner_rhs && (m_outer as f64) < outer_rhs;
    Ok(NormalityRecord {
        r,
        status: if normal { NormalStatus::Normal } else { NormalStatus::Exceptional },
        m,
        delta: Some(delta),
        m_inner,
        inner_rhs,
        m_outer,
        outer_rhs,
    })
}

pub fn is_normal(model: &CoefficientModel, r: f64) -> Result<NormalityRecord> {
    if !(r >= 1.0) {
        return domain(format!("normality needs r >= 1, got {r}"));
    }
    let ps = power_set(model, r)?;
    classify(model, r, &ps)
}

/// Geometric grid rule for [`exceptional_scan`]: the log-step at `r` is
/// `min(delta_fraction * delta(r), max_log_step)`, and `max_log_step` at
/// degenerate points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRule {
    pub delta_fraction: f64,
    pub max_log_step: f64,
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule { delta_fraction: 0.25, max_log_step: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlaggedInterval {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub degenerate_points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExceptionalScan {
    pub r_min: f64,
    pub r_max: f64,
    pub intervals: Vec<FlaggedInterval>,
    /// Sum of `log(hi/lo)` over flagged intervals.
    pub log_measure: f64,
    pub grid: Vec<NormalityRecord>,
}

/// Flags every grid cell whose left endpoint is not normal and merges runs.
/// Each cell is `[r_i, min(r_{i+1}, r_max)]`.
pub fn exceptional_scan(
    model: &CoefficientModel,
    r_min: f64,
    r_max: f64,
    rule: StepRule,
) -> Result<ExceptionalScan> {
    if !(r_min >= 1.0 && r_max > r_min && r_max.is_finite()) {
        return domain(format!("empty scan grid: need 1 <= r_min < r_max, got [{r_min}, {r_max}]"));
    }
    if !(rule.delta_fraction > 0.0 && rule.max_log_step > 0.0) {
        return domain("step rule must have positive steps");
    }
    let mut grid = Vec::new();
    let mut intervals: Vec<FlaggedInterval> = Vec::new();
    let mut open: Option<FlaggedInterval> = None;
    let mut r = r_min;
    while r < r_max {
        let rec = is_normal(model, r)?;
        let step = match rec.delta {
            Some(d) => (rule.delta_fraction * d).min(rule.max_log_step),
            None => rule.max_log_step,
        };
        let next = (r * step.exp()).min(r_max);
        if rec.status == NormalStatus::Normal {
            if let Some(iv) = open.take() {
                intervals.push(iv);
            }
        } else {
            let iv = open.get_or_insert(FlaggedInterval { lo: r, hi: r, points: 0, degenerate_points: 0 });
            iv.hi = next;
            iv.points += 1;
            if rec.status == NormalStatus::Degenerate {
                iv.degenerate_points += 1;
            }
        }
        grid.push(rec);
        r = next;
    }
    intervals.extend(open);
    let log_measure = compensated_sum(intervals.iter().map(|iv| (iv.hi / iv.lo).ln()));
    Ok(ExceptionalScan { r_min, r_max, intervals, log_measure, grid })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SLowerAudit {
    pub r: f64,
    pub status: NormalStatus,
    pub s: f64,
    /// `3/2 m^(3/4)`.
    pub bound: f64,
    /// `n^(3/2)`, reported with the ratio `S / n^(3/2)`; no constant asserted.
    pub n_pow: f64,
    pub ratio_to_n_pow: f64,
    pub pass: bool,
}

/// `S(r) >= 3/2 m(r)^(3/4)` at a normal radius.
pub fn s_lower_audit(model: &CoefficientModel, r: f64) -> Result<SLowerAudit> {
    let audit = s_lower_audit_unchecked(model, r)?;
    if audit.status != NormalStatus::Normal {
        return precondition(format!("r = {r} is {}, not normal", audit.status.as_str()));
    }
    Ok(audit)
}

/// Same inequality without the normality precondition, for auditing margins
/// at radii the strict definition rejects.
pub fn s_lower_audit_unchecked(model: &CoefficientModel, r: f64) -> Result<SLowerAudit> {
    let a = radial_analysis(model, r)?;
    let bound = 1.5 * (a.m_mass as f64).powf(0.75);
    let n_pow = (a.n_count as f64).powf(1.5);
    Ok(SLowerAudit {
        r,
        status: a.normal_status,
        s: a.s_weight,
        bound,
        n_pow,
        ratio_to_n_pow: a.s_weight / n_pow,
        pass: a.s_weight >= bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SGrowthAudit {
    pub r: f64,
    pub gamma: f64,
    pub s: f64,
    pub s_shrunk: f64,
    /// `4 gamma m(r)`.
    pub budget: f64,
    pub pass: bool,
}

/// `S((1-gamma) r) >= S(r) - 4 gamma m(r)` for `gamma` in `(0, 1/2)`.
pub fn s_growth_audit(model: &CoefficientModel, r: f64, gamma: f64) -> Result<SGrowthAudit> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return domain(format!("gamma must lie in (0, 1/2), got {gamma}"));
    }
    let shrunk = (1.0 - gamma) * r;
    if !(shrunk >= 1.0) {
        return domain(format!("(1 - gamma) r = {shrunk} < 1"));
    }
    let full = power_set(model, r)?;
    let inner = power_set(model, shrunk)?;
    let budget = 4.0 * gamma * full.m as f64;
    Ok(SGrowthAudit {
        r,
        gamma,
        s: full.s,
        s_shrunk: inner.s,
        budget,
        pass: inner.s >= full.s - budget,
    })
}
