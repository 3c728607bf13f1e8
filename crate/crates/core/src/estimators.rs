//! Hole-probability estimators.
//!
//! Ambiguous contour draws count as "not a hole" in every point estimate, so
//! the reported `p_hat` is biased downward by at most the (weighted)
//! ambiguous fraction, which is reported alongside.

use serde::Serialize;

use crate::asymptotics::RadialAnalysis;
use crate::certificates::{omega_classes, OmegaClass};
use crate::error::{domain, Result};
use crate::model::CoefficientModel;
use crate::numerics::{clopper_pearson, CompensatedSum, Z_99};
use crate::parallel::Workers;
use crate::rng::{complex_gaussian, stream};
use crate::sampler::{truncation_plan, SampleDraw, TruncationPlan};
use crate::zeros::{classify, default_margin, Contour, HoleState};

/// Constant of event (i) used by default.
pub const DEFAULT_C0: f64 = 4.0;
/// Exponent applied to the `Ω_r` scales in the default proposal.
pub const DEFAULT_TILT_EXPONENT: f64 = 1.0 / 3.0;
pub const DEFAULT_C_BAND: f64 = 10.0;

#[derive(Debug, Clone, Copy)]
pub struct EstimatorOptions {
    pub eps_tail: f64,
    pub eps_fail: f64,
    /// Ambiguity margin on `log|f|`; defaults to [`default_margin`].
    pub margin: Option<f64>,
    pub workers: Workers,
    /// Use the self-normalized importance estimator instead of the unbiased one.
    pub self_normalized: bool,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions { eps_tail: 1e-8, eps_fail: 1e-10, margin: None, workers: Workers::default(), self_normalized: false }
    }
}

/// Per-index complex Gaussian scales of an importance proposal.
#[derive(Debug, Clone, Serialize)]
pub struct TiltSchedule {
    pub r: f64,
    pub c0: f64,
    /// `sigma_n` for `n < sigma.len()`; later indices are untilted.
    pub sigma: Vec<f64>,
    pub classes: Vec<OmegaClass>,
}

impl TiltSchedule {
    pub fn identity(r: f64) -> Self {
        TiltSchedule { r, c0: 0.0, sigma: vec![1.0], classes: vec![OmegaClass::Constant] }
    }

    pub fn sigma(&self, n: usize) -> f64 {
        self.sigma.get(n).copied().unwrap_or(1.0)
    }

    pub fn is_identity(&self) -> bool {
        self.sigma.iter().all(|&s| s == 1.0)
    }

    /// Raises the constant and dominated scales to `exponent` and, when
    /// `release_suppressed`, resets the suppressed class to 1.
    ///
    /// The exact `Ω_r` scales concentrate the proposal on a set much smaller
    /// than the hole event, and the weights then degenerate.
    pub fn tempered(&self, exponent: f64, release_suppressed: bool) -> Self {
        let sigma = self
            .sigma
            .iter()
            .zip(&self.classes)
            .map(|(&s, class)| match class {
                OmegaClass::Constant | OmegaClass::Dominated => s.powf(exponent),
                OmegaClass::Suppressed if release_suppressed => 1.0,
                _ => s,
            })
            .collect();
        TiltSchedule { sigma, ..self.clone() }
    }
}

/// Scales matching the events of `Ω_r`.
pub fn tilt_schedule(model: &CoefficientModel, r: f64, c0: f64) -> Result<TiltSchedule> {
    if !(c0 >= 0.0 && c0.is_finite()) {
        return domain(format!("C0 must be finite and nonnegative, got {c0}"));
    }
    let classes = omega_classes(model, r)?;
    let end = classes.structured_end();
    let root_m = classes.m.sqrt();
    let mut sigma = Vec::with_capacity(end + 1);
    let mut tags = Vec::with_capacity(end + 1);
    for n in 0..=end {
        let class = classes.class(n);
        let s = match class {
            OmegaClass::Constant => classes.constant_floor(c0).max(1.0),
            OmegaClass::Dominated => ((-classes.analysis.weight(n)).exp() / root_m).min(1.0),
            OmegaClass::Suppressed => (1.0 / root_m).min(1.0),
            OmegaClass::Tail | OmegaClass::Free => 1.0,
        };
        sigma.push(s);
        tags.push(class);
    }
    Ok(TiltSchedule { r, c0, sigma, classes: tags })
}

/// The tempered proposal used when no schedule is given explicitly.
pub fn default_proposal(model: &CoefficientModel, r: f64) -> Result<TiltSchedule> {
    Ok(tilt_schedule(model, r, DEFAULT_C0)?.tempered(DEFAULT_TILT_EXPONENT, true))
}

/// Draws `xi_n = sigma_n g_n` from the same normals `g_n` as [`crate::sampler::draw`]
/// and records `log(dP/dQ) = sum 2 ln sigma_n - |xi_n|^2 (1 - sigma_n^-2)`.
pub fn draw_tilted(plan: &TruncationPlan, schedule: &TiltSchedule, seed: u64, stream_id: u64) -> SampleDraw {
    let mut rng = stream(seed, stream_id);
    let mut log_weight = CompensatedSum::new();
    let xi = (0..=plan.k)
        .map(|n| {
            let g = complex_gaussian(&mut rng);
            let s = schedule.sigma(n);
            if s == 1.0 {
                return g;
            }
            let x = g * s;
            log_weight.add(2.0 * s.ln() - x.norm_sqr() * (1.0 - 1.0 / (s * s)));
            x
        })
        .collect();
    SampleDraw { radius: plan.r, xi, log_weight: log_weight.value(), seed, stream_id }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Naive,
    Importance,
    SelfNormalized,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::Importance => "importance",
            Method::SelfNormalized => "self-normalized",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatorReport {
    pub method: Method,
    pub r: f64,
    pub seed: u64,
    pub trials: u64,
    pub k: usize,
    pub hole_hits: u64,
    pub ambiguous_count: u64,
    /// `sum w_i 1{hole_i}`.
    pub weight_sum: f64,
    /// `sum (w_i 1{hole_i})^2`.
    pub weight_sq_sum: f64,
    /// `sum w_i 1{ambiguous_i} / trials`, the bound on the downward bias.
    pub ambiguous_mass: f64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    #[serde(rename = "p_H_hat")]
    pub p_h_hat: f64,
    /// `(sum w)^2 / sum w^2` over all draws.
    pub ess: f64,
    /// The same ratio restricted to hole draws.
    pub hit_ess: f64,
}

struct Trial {
    state: HoleState,
    log_weight: f64,
}

fn run(
    model: &CoefficientModel,
    r: f64,
    trials: u64,
    seed: u64,
    schedule: Option<&TiltSchedule>,
    opts: &EstimatorOptions,
) -> Result<(TruncationPlan, Vec<Trial>)> {
    if trials == 0 {
        return domain("trials must be positive");
    }
    let plan = truncation_plan(model, r, opts.eps_tail, opts.eps_fail)?;
    if let Some(s) = schedule {
        if s.sigma.iter().skip(plan.k + 1).any(|&x| x != 1.0) {
            return domain(format!(
                "schedule/plan length mismatch: schedule tilts {} indices, plan keeps {}",
                s.sigma.len(),
                plan.k + 1
            ));
        }
    }
    let margin = opts.margin.unwrap_or_else(|| default_margin(plan.eps_tail));
    let contour = Contour::new(model, r, plan.k, margin)?;
    let results = opts.workers.map_indexed(trials, |i| {
        let sample = match schedule {
            Some(s) => draw_tilted(&plan, s, seed, i),
            None => crate::sampler::draw(&plan, seed, i),
        };
        contour.scan(&sample).map(|scan| Trial { state: classify(&scan), log_weight: sample.log_weight })
    });
    let trials = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((plan, trials))
}

pub fn estimate_naive(
    model: &CoefficientModel,
    r: f64,
    trials: u64,
    seed: u64,
    opts: &EstimatorOptions,
) -> Result<EstimatorReport> {
    let (plan, results) = run(model, r, trials, seed, None, opts)?;
    Ok(reduce(Method::Naive, r, seed, plan.k, &results, true))
}

pub fn estimate_importance(
    model: &CoefficientModel,
    r: f64,
    trials: u64,
    seed: u64,
    schedule: &TiltSchedule,
    opts: &EstimatorOptions,
) -> Result<EstimatorReport> {
    let (plan, results) = run(model, r, trials, seed, Some(schedule), opts)?;
    let method = if opts.self_normalized { Method::SelfNormalized } else { Method::Importance };
    Ok(reduce(method, r, seed, plan.k, &results, schedule.is_identity()))
}

fn reduce(method: Method, r: f64, seed: u64, k: usize, results: &[Trial], identity: bool) -> EstimatorReport {
    let trials = results.len() as u64;
    let t = trials as f64;
    let (mut hits, mut ambiguous) = (0u64, 0u64);
    let mut w_all = CompensatedSum::new();
    let mut w_all_sq = CompensatedSum::new();
    let mut w_hit = CompensatedSum::new();
    let mut w_hit_sq = CompensatedSum::new();
    let mut w_amb = CompensatedSum::new();
    for trial in results {
        let w = trial.log_weight.exp();
        w_all.add(w);
        w_all_sq.add(w * w);
        match trial.state {
            HoleState::Hole => {
                hits += 1;
                w_hit.add(w);
                w_hit_sq.add(w * w);
            }
            HoleState::Ambiguous => {
                ambiguous += 1;
                w_amb.add(w);
            }
            HoleState::NotHole => {}
        }
    }
    let (sum, sq) = (w_hit.value(), w_hit_sq.value());
    let ess = w_all.value().powi(2) / w_all_sq.value();
    let hit_ess = if sq > 0.0 { sum * sum / sq } else { 0.0 };
    let p_raw = match method {
        Method::SelfNormalized => sum / w_all.value(),
        _ => sum / t,
    };
    let p_hat = p_raw.min(1.0);

    let (ci_lo, ci_hi) = if method == Method::Naive || identity {
        clopper_pearson(hits, trials, 0.01)
    } else if p_hat == 0.0 || trials < 2 {
        (0.0, 1.0)
    } else {
        let var = ((sq - t * p_raw * p_raw) / (t - 1.0)).max(0.0);
        let rel = (var / t).sqrt() / p_raw;
        ((p_hat * (-Z_99 * rel).exp()).min(p_hat), (p_hat * (Z_99 * rel).exp()).clamp(p_hat, 1.0))
    };

    EstimatorReport {
        method,
        r,
        seed,
        trials,
        k,
        hole_hits: hits,
        ambiguous_count: ambiguous,
        weight_sum: sum,
        weight_sq_sum: sq,
        ambiguous_mass: w_amb.value() / t,
        p_hat,
        ci_lo,
        ci_hi,
        p_h_hat: -p_hat.ln(),
        ess: ess.min(t),
        hit_ess,
    }
}

/// Estimated `p_H(r)` set against `S(r)` and the two-sided band
/// `[S - C n log S, S + C sqrt(m) log m]`.
#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub r: f64,
    #[serde(rename = "p_H_hat")]
    pub p_h_hat: f64,
    #[serde(rename = "S")]
    pub s: f64,
    /// `p_H_hat / S`; `None` when `S = 0`.
    pub ratio: Option<f64>,
    pub band_lo: f64,
    pub band_hi: f64,
    pub within_band: bool,
}

pub fn summarize(report: &EstimatorReport, analysis: &RadialAnalysis, c_band: f64) -> Result<Comparison> {
    if (report.r - analysis.r).abs() > 1e-12 * analysis.r {
        return domain(format!("report radius {} differs from analysis radius {}", report.r, analysis.r));
    }
    let s = analysis.s_weight;
    let n = analysis.n_count as f64;
    let m = analysis.m_mass as f64;
    let lower_slack = if s > 0.0 { c_band * n * s.ln() } else { 0.0 };
    let upper_slack = if m > 1.0 { c_band * m.sqrt() * m.ln() } else { 0.0 };
    let band_lo = s - lower_slack;
    let band_hi = s + upper_slack;
    let p = report.p_h_hat;
    Ok(Comparison {
        r: analysis.r,
        p_h_hat: p,
        s,
        ratio: (s > 0.0).then(|| p / s),
        band_lo,
        band_hi,
        within_band: band_lo.min(band_hi) <= p && p <= band_hi.max(band_lo),
    })
}
