//! One function per subcommand. Each returns the encoded artifact; nothing
//! here touches the filesystem.

use anyhow::{bail, Context, Result};
use gaf_hole::asymptotics::{exceptional_scan, is_normal, StepRule};
use gaf_hole::certificates::{
    conditional_hole_check, covariance_logdet, omega_log_prob, vandermonde_search, volume_bound_audit,
    PointConfiguration,
};
use gaf_hole::estimators::{
    estimate_importance, estimate_naive, summarize, tilt_schedule, EstimatorOptions, EstimatorReport,
};
use gaf_hole::numerics::{clopper_pearson, compensated_sum};
use gaf_hole::sampler::{draw, log_deriv_profile, max_modulus, truncation_plan};
use gaf_hole::{radial_analysis, Error, NormalStatus, Workers};
use serde::Serialize;

use crate::config::{CheckName, ExperimentConfig, Format, MethodName};
use crate::output::{encode, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    Analyze,
    Scan,
    Estimate,
    Certify,
    Diagnose,
}

impl Subcommand {
    pub fn as_str(self) -> &'static str {
        match self {
            Subcommand::Analyze => "analyze",
            Subcommand::Scan => "scan",
            Subcommand::Estimate => "estimate",
            Subcommand::Certify => "certify",
            Subcommand::Diagnose => "diagnose",
        }
    }
}

pub struct Artifact {
    pub bytes: Vec<u8>,
    /// Some certificate check did not pass.
    pub failed: bool,
}

pub fn run(cmd: Subcommand, config: &ExperimentConfig) -> Result<Artifact> {
    if config.threads == Some(0) {
        bail!("threads: must be at least 1");
    }
    let format = match (cmd, config.format) {
        (Subcommand::Certify, Some(Format::Csv)) => bail!("format: certify records are nested, use json-lines"),
        (Subcommand::Certify, _) => Format::JsonLines,
        (_, f) => f.unwrap_or(Format::Csv),
    };
    let ctx = Ctx { config, model_id: config.model_id(), workers: Workers(config.threads) };
    let (bytes, failed) = match cmd {
        Subcommand::Analyze => (encode(&ctx.analyze()?, format)?, false),
        Subcommand::Scan => (encode(&ctx.scan()?, format)?, false),
        Subcommand::Estimate => (encode(&ctx.estimate()?, format)?, false),
        Subcommand::Diagnose => (encode(&ctx.diagnose()?, format)?, false),
        Subcommand::Certify => {
            let rows = ctx.certify()?;
            let failed = rows.iter().any(|r| !r.pass);
            (encode(&rows, format)?, failed)
        }
    };
    Ok(Artifact { bytes, failed })
}

struct Ctx<'a> {
    config: &'a ExperimentConfig,
    model_id: String,
    workers: Workers,
}

#[derive(Serialize)]
struct AnalyzeRow {
    schema_version: u32,
    subcommand: &'static str,
    model_id: String,
    r: f64,
    seed: Option<u64>,
    n: usize,
    m: u64,
    #[serde(rename = "S")]
    s: f64,
    delta: Option<f64>,
    status: &'static str,
    m_inner: u64,
    inner_rhs: f64,
    m_outer: u64,
    outer_rhs: f64,
}

#[derive(Serialize)]
struct ScanRow {
    schema_version: u32,
    subcommand: &'static str,
    model_id: String,
    r: f64,
    seed: Option<u64>,
    /// `interval` for a flagged cell run, `total` for the whole grid.
    record: &'static str,
    r_hi: f64,
    points: usize,
    degenerate_points: usize,
    log_measure: f64,
}

#[derive(Serialize)]
struct EstimateRow {
    schema_version: u32,
    subcommand: &'static str,
    model_id: String,
    r: f64,
    seed: u64,
    method: &'static str,
    trials: u64,
    k: usize,
    hole_hits: u64,
    ambiguous_count: u64,
    weight_sum: f64,
    weight_sq_sum: f64,
    ambiguous_mass: f64,
    p_hat: f64,
    ci_lo: f64,
    ci_hi: f64,
    #[serde(rename = "p_H_hat")]
    p_h_hat: f64,
    ess: f64,
    hit_ess: f64,
    #[serde(rename = "S")]
    s: Option<f64>,
    ratio: Option<f64>,
    band_lo: Option<f64>,
    band_hi: Option<f64>,
    within_band: Option<bool>,
}

#[derive(Serialize)]
struct DiagnoseRow {
    schema_version: u32,
    subcommand: &'static str,
    model_id: String,
    r: f64,
    seed: u64,
    trials: u64,
    status: &'static str,
    #[serde(rename = "S")]
    s: f64,
    n: usize,
    grid_size: usize,
    log_max_mean: f64,
    log_max_min: f64,
    log_max_max: f64,
    /// Draws with `log M(r) >= 3 S(r)`.
    high_count: u64,
    high_ci_hi: f64,
    /// `exp(-S^2)`.
    high_bound: f64,
    /// Draws with `log M(r) <= -S(r)`.
    low_count: u64,
    low_ci_hi: f64,
    /// `exp(-S n)`.
    low_bound: f64,
    rho: f64,
    log_deriv_mean: Option<f64>,
    log_deriv_max: Option<f64>,
    zero_on_contour: u64,
}

#[derive(Serialize)]
struct CertifyRow {
    schema_version: u32,
    subcommand: &'static str,
    model_id: String,
    /// Absent for the radius-free volume audit.
    r: Option<f64>,
    seed: u64,
    check: &'static str,
    pass: bool,
    error: Option<String>,
    record: serde_json::Value,
}

/// 99% Clopper-Pearson intervals throughout.
const CI_ALPHA: f64 = 0.01;

fn radius_context(i: usize, r: f64) -> String {
    format!("radii[{i}] = {r}")
}

impl Ctx<'_> {
    fn estimator_options(&self) -> EstimatorOptions {
        let c = self.config;
        EstimatorOptions {
            eps_tail: c.sampler.eps_tail,
            eps_fail: c.sampler.eps_fail,
            margin: c.sampler.margin,
            workers: self.workers,
            self_normalized: c.estimate.self_normalized,
        }
    }

    fn analyze(&self) -> Result<Vec<AnalyzeRow>> {
        let model = &self.config.model;
        let mut rows = Vec::new();
        for (i, r) in self.config.radii()?.into_iter().enumerate() {
            let a = radial_analysis(model, r).with_context(|| radius_context(i, r))?;
            let rec = is_normal(model, r).with_context(|| radius_context(i, r))?;
            rows.push(AnalyzeRow {
                schema_version: SCHEMA_VERSION,
                subcommand: "analyze",
                model_id: self.model_id.clone(),
                r,
                seed: self.config.seed,
                n: a.n_count,
                m: a.m_mass,
                s: a.s_weight,
                delta: a.delta,
                status: a.normal_status.as_str(),
                m_inner: rec.m_inner,
                inner_rhs: rec.inner_rhs,
                m_outer: rec.m_outer,
                outer_rhs: rec.outer_rhs,
            });
        }
        Ok(rows)
    }

    fn scan(&self) -> Result<Vec<ScanRow>> {
        let c = &self.config.scan;
        let radii = match &self.config.radii {
            Some(_) => Some(self.config.radii()?),
            None => None,
        };
        let r_min = match (c.r_min, &radii) {
            (Some(v), _) => v,
            (None, Some(r)) => r.iter().copied().fold(f64::INFINITY, f64::min),
            (None, None) => bail!("scan.r_min: set it or give radii"),
        };
        let r_max = match (c.r_max, &radii) {
            (Some(v), _) => v,
            (None, Some(r)) => r.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            (None, None) => bail!("scan.r_max: set it or give radii"),
        };
        let rule = StepRule { delta_fraction: c.delta_fraction, max_log_step: c.max_log_step };
        let scan = exceptional_scan(&self.config.model, r_min, r_max, rule).context("scan")?;
        let row = |record, r, r_hi, points, degenerate_points, log_measure| ScanRow {
            schema_version: SCHEMA_VERSION,
            subcommand: "scan",
            model_id: self.model_id.clone(),
            r,
            seed: self.config.seed,
            record,
            r_hi,
            points,
            degenerate_points,
            log_measure,
        };
        let mut rows: Vec<ScanRow> = scan
            .intervals
            .iter()
            .map(|iv| row("interval", iv.lo, iv.hi, iv.points, iv.degenerate_points, (iv.hi / iv.lo).ln()))
            .collect();
        let degenerate = scan.grid.iter().filter(|g| g.status == NormalStatus::Degenerate).count();
        rows.push(row("total", scan.r_min, scan.r_max, scan.grid.len(), degenerate, scan.log_measure));
        Ok(rows)
    }

    fn estimate(&self) -> Result<Vec<EstimateRow>> {
        let seed = self.config.require_seed()?;
        let c = &self.config.estimate;
        if c.trials == 0 {
            bail!("estimate.trials: must be positive");
        }
        if c.methods.is_empty() {
            bail!("estimate.methods: at least one method is required");
        }
        let model = &self.config.model;
        let opts = self.estimator_options();
        let mut rows = Vec::new();
        for (i, r) in self.config.radii()?.into_iter().enumerate() {
            // S(r) and the band are only defined for r >= 1
            let analysis = if r >= 1.0 { Some(radial_analysis(model, r).with_context(|| radius_context(i, r))?) } else { None };
            for &method in &c.methods {
                let report = match method {
                    MethodName::Naive => estimate_naive(model, r, c.trials, seed, &opts),
                    MethodName::Importance => tilt_schedule(model, r, c.c0)
                        .map(|s| s.tempered(c.tilt_exponent, c.release_suppressed))
                        .and_then(|s| estimate_importance(model, r, c.trials, seed, &s, &opts)),
                }
                .with_context(|| format!("{}: estimate.methods {method:?}", radius_context(i, r)))?;
                let cmp = analysis.as_ref().map(|a| summarize(&report, a, c.c_band)).transpose()?;
                rows.push(self.estimate_row(&report, cmp));
            }
        }
        Ok(rows)
    }

    fn estimate_row(&self, rep: &EstimatorReport, cmp: Option<gaf_hole::estimators::Comparison>) -> EstimateRow {
        EstimateRow {
            schema_version: SCHEMA_VERSION,
            subcommand: "estimate",
            model_id: self.model_id.clone(),
            r: rep.r,
            seed: rep.seed,
            method: rep.method.as_str(),
            trials: rep.trials,
            k: rep.k,
            hole_hits: rep.hole_hits,
            ambiguous_count: rep.ambiguous_count,
            weight_sum: rep.weight_sum,
            weight_sq_sum: rep.weight_sq_sum,
            ambiguous_mass: rep.ambiguous_mass,
            p_hat: rep.p_hat,
            ci_lo: rep.ci_lo,
            ci_hi: rep.ci_hi,
            p_h_hat: rep.p_h_hat,
            ess: rep.ess,
            hit_ess: rep.hit_ess,
            s: cmp.as_ref().map(|c| c.s),
            ratio: cmp.as_ref().and_then(|c| c.ratio),
            band_lo: cmp.as_ref().map(|c| c.band_lo),
            band_hi: cmp.as_ref().map(|c| c.band_hi),
            within_band: cmp.as_ref().map(|c| c.within_band),
        }
    }

    fn diagnose(&self) -> Result<Vec<DiagnoseRow>> {
        let seed = self.config.require_seed()?;
        let c = &self.config.diagnose;
        if c.trials == 0 {
            bail!("diagnose.trials: must be positive");
        }
        if !(c.rho_fraction > 0.0 && c.rho_fraction < 1.0) {
            bail!("diagnose.rho_fraction: must lie in (0, 1), got {}", c.rho_fraction);
        }
        let model = &self.config.model;
        let mut rows = Vec::new();
        for (i, r) in self.config.radii()?.into_iter().enumerate() {
            let a = radial_analysis(model, r).with_context(|| radius_context(i, r))?;
            let plan = truncation_plan(model, r, self.config.sampler.eps_tail, self.config.sampler.eps_fail)
                .with_context(|| radius_context(i, r))?;
            let min_grid = 8 * (a.max_index() + 1);
            let grid = c.grid_size.unwrap_or(min_grid);
            if grid < min_grid {
                bail!("diagnose.grid_size: {grid} is below 8 (max N(r) + 1) = {min_grid} at {}", radius_context(i, r));
            }
            let rho = c.rho_fraction * r;
            let draws = self.workers.map_indexed(c.trials, |t| {
                let sample = draw(&plan, seed, t);
                let log_max = max_modulus(&sample, model, r, grid)?;
                let deriv = match log_deriv_profile(&sample, model, rho, c.deriv_grid) {
                    Ok(d) => Some(d),
                    Err(Error::ZeroOnContour { .. }) => None,
                    Err(e) => return Err(e),
                };
                Ok((log_max, deriv))
            });
            let draws = draws.into_iter().collect::<gaf_hole::Result<Vec<_>>>().with_context(|| radius_context(i, r))?;

            let (s, n) = (a.s_weight, a.n_count);
            let t = c.trials as f64;
            let logs: Vec<f64> = draws.iter().map(|d| d.0).collect();
            let derivs: Vec<f64> = draws.iter().filter_map(|d| d.1).collect();
            let high = logs.iter().filter(|&&x| x >= 3.0 * s).count() as u64;
            let low = logs.iter().filter(|&&x| x <= -s).count() as u64;
            rows.push(DiagnoseRow {
                schema_version: SCHEMA_VERSION,
                subcommand: "diagnose",
                model_id: self.model_id.clone(),
                r,
                seed,
                trials: c.trials,
                status: a.normal_status.as_str(),
                s,
                n,
                grid_size: grid,
                log_max_mean: compensated_sum(logs.iter().copied()) / t,
                log_max_min: logs.iter().copied().fold(f64::INFINITY, f64::min),
                log_max_max: logs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                high_count: high,
                high_ci_hi: clopper_pearson(high, c.trials, CI_ALPHA).1,
                high_bound: (-s * s).exp(),
                low_count: low,
                low_ci_hi: clopper_pearson(low, c.trials, CI_ALPHA).1,
                low_bound: (-s * n as f64).exp(),
                rho,
                log_deriv_mean: (!derivs.is_empty())
                    .then(|| compensated_sum(derivs.iter().copied()) / derivs.len() as f64),
                log_deriv_max: derivs.iter().copied().reduce(f64::max),
                zero_on_contour: c.trials - derivs.len() as u64,
            });
        }
        Ok(rows)
    }

    fn certify(&self) -> Result<Vec<CertifyRow>> {
        let seed = self.config.require_seed()?;
        let c = &self.config.certify;
        if c.checks.is_empty() {
            bail!("certify.checks: at least one check is required");
        }
        if c.checks.contains(&CheckName::Conditional) && c.trials == 0 {
            bail!("certify.trials: must be positive");
        }
        let volume = if c.checks.contains(&CheckName::Volume) {
            Some(c.volume.as_ref().context("certify.volume: the volume check needs dim, s and t")?)
        } else {
            None
        };
        let per_radius = c.checks.iter().any(|&k| k != CheckName::Volume);
        let radii = if per_radius { self.config.radii()? } else { Vec::new() };

        let model = &self.config.model;
        let opts = self.estimator_options();
        let row = |r: Option<f64>, check: &'static str, outcome: CheckOutcome| CertifyRow {
            schema_version: SCHEMA_VERSION,
            subcommand: "certify",
            model_id: self.model_id.clone(),
            r,
            seed,
            check,
            pass: outcome.pass,
            error: outcome.error,
            record: outcome.record,
        };

        let needs_points = c.checks.iter().any(|k| matches!(k, CheckName::Vandermonde | CheckName::Covariance));
        let mut rows = Vec::new();
        for &r in &radii {
            // the point search feeds both the vandermonde and covariance checks
            let search: Option<std::result::Result<PointConfiguration, Error>> = needs_points.then(|| {
                let a = radial_analysis(model, r)?;
                vandermonde_search(r, &a.power_set[1..], c.max_tries, seed)
            });
            for &check in &c.checks {
                let (name, outcome) = match check {
                    CheckName::Volume => continue,
                    CheckName::Omega => ("omega", CheckOutcome::from(omega_log_prob(model, r, c.c0), |cert| {
                        let m = cert.m as f64;
                        let band = c.c_band * m.sqrt() * m.ln();
                        cert.margin >= 0.0 && cert.margin <= band
                    })),
                    CheckName::Conditional => (
                        "conditional",
                        CheckOutcome::from(conditional_hole_check(model, r, c.trials, seed, c.c0, &opts), |rep| {
                            rep.holes == rep.trials
                        }),
                    ),
                    CheckName::Vandermonde => ("vandermonde", match search.as_ref().expect("point search ran") {
                        Ok(cfg) => CheckOutcome::passed(cfg.success(), cfg),
                        Err(Error::SearchExhausted { best }) => CheckOutcome::failed_with(
                            format!("search exhausted after {} tries", best.tries_used),
                            best.as_ref(),
                        ),
                        Err(e) => CheckOutcome::error(e),
                    }),
                    CheckName::Covariance => {
                        let angles = match search.as_ref().expect("point search ran") {
                            Ok(cfg) => Ok(cfg.angles.clone()),
                            Err(Error::SearchExhausted { best }) => Ok(best.angles.clone()),
                            Err(e) => Err(e.to_string()),
                        };
                        let outcome = match angles {
                            Ok(angles) => {
                                let audit = truncation_plan(model, r, opts.eps_tail, opts.eps_fail)
                                    .and_then(|plan| covariance_logdet(model, r, &angles, plan.k));
                                CheckOutcome::from(audit, |a| a.margin + COVARIANCE_SLACK * a.s.abs().max(1.0) >= 0.0)
                            }
                            Err(msg) => CheckOutcome { pass: false, error: Some(msg), record: serde_json::Value::Null },
                        };
                        ("covariance", outcome)
                    }
                };
                rows.push(row(Some(r), name, outcome));
            }
        }
        if let Some(v) = volume {
            let audit = volume_bound_audit(v.dim, v.s, v.t, v.trials, seed, self.workers);
            rows.push(row(None, "volume", CheckOutcome::from(audit, |a| a.pass)));
        }
        Ok(rows)
    }
}

/// Relative rounding allowance on `log det Sigma >= S(rho)`.
const COVARIANCE_SLACK: f64 = 1e-6;

struct CheckOutcome {
    pass: bool,
    error: Option<String>,
    record: serde_json::Value,
}

impl CheckOutcome {
    fn from<T: Serialize>(res: gaf_hole::Result<T>, pass: impl FnOnce(&T) -> bool) -> Self {
        match res {
            Ok(v) => CheckOutcome::passed(pass(&v), &v),
            Err(e) => CheckOutcome::error(&e),
        }
    }

    fn passed<T: Serialize>(pass: bool, record: &T) -> Self {
        CheckOutcome { pass, error: None, record: to_value(record) }
    }

    fn failed_with<T: Serialize>(msg: String, record: &T) -> Self {
        CheckOutcome { pass: false, error: Some(msg), record: to_value(record) }
    }

    fn error(e: &Error) -> Self {
        CheckOutcome { pass: false, error: Some(e.to_string()), record: serde_json::Value::Null }
    }
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("certificate records serialize")
}
