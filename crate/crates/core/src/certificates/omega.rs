use num_complex::Complex64;
use serde::Serialize;

use crate::asymptotics::{n_delta_tilde, radial_analysis, RadialAnalysis};
use crate::error::{precondition, Result};
use crate::estimators::EstimatorOptions;
use crate::model::CoefficientModel;
use crate::numerics::{compensated_sum, ln_one_minus_exp_neg};
use crate::rng::{open01, stream, uniform_phase};
use crate::sampler::{truncation_plan, SampleDraw};
use crate::zeros::{default_margin, Contour, HoleState};

/// Which event of `Ω_r` constrains coordinate `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaClass {
    /// `n = 0`: `|xi_0| >= C0 m^(1/4)`.
    Constant,
    /// `n` in `N(r) \ {0}`: `|xi_n| <= e^(-w_n) / sqrt(m)`.
    Dominated,
    /// `n` in `Ñ_delta(r) \ N(r)`: `|xi_n| <= 1 / sqrt(m)`.
    Suppressed,
    /// Supported `n` outside `Ñ_delta(r)`: `|xi_n| <= e^(delta n / 2)`.
    Tail,
    /// `a_n = 0`; the coordinate does not enter `f`.
    Free,
}

/// Class structure of `Ω_r` at one radius.
#[derive(Debug, Clone)]
pub struct OmegaClasses {
    pub analysis: RadialAnalysis,
    pub m: f64,
    pub delta: f64,
    /// Sorted `Ñ_delta(r)`.
    pub tilde: Vec<usize>,
    model: CoefficientModel,
}

pub fn omega_classes(model: &CoefficientModel, r: f64) -> Result<OmegaClasses> {
    let analysis = radial_analysis(model, r)?;
    let Some(delta) = analysis.delta else {
        return precondition(format!("m({r}) = 0: the event Ω_r is undefined at a degenerate radius"));
    };
    let tilde = n_delta_tilde(model, &analysis)?;
    Ok(OmegaClasses { m: analysis.m_mass as f64, delta, tilde, analysis, model: model.clone() })
}

impl OmegaClasses {
    pub fn class(&self, n: usize) -> OmegaClass {
        if n == 0 {
            OmegaClass::Constant
        } else if self.model.ln_a(n) == f64::NEG_INFINITY {
            OmegaClass::Free
        } else if self.analysis.power_set.binary_search(&n).is_ok() {
            OmegaClass::Dominated
        } else if self.tilde.binary_search(&n).is_ok() {
            OmegaClass::Suppressed
        } else {
            OmegaClass::Tail
        }
    }

    /// Largest index of a `Constant`, `Dominated` or `Suppressed` class.
    pub fn structured_end(&self) -> usize {
        self.tilde.last().copied().unwrap_or(0)
    }

    /// `|xi_0|` lower bound of event (i).
    pub fn constant_floor(&self, c0: f64) -> f64 {
        c0 * self.m.powf(0.25)
    }

    /// Modulus cap for a capped class, `None` for `Constant` and `Free`.
    pub fn cap(&self, n: usize) -> Option<f64> {
        match self.class(n) {
            OmegaClass::Dominated => Some((-self.analysis.weight(n)).exp() / self.m.sqrt()),
            OmegaClass::Suppressed => Some(1.0 / self.m.sqrt()),
            OmegaClass::Tail => Some((0.5 * self.delta * n as f64).exp()),
            OmegaClass::Constant | OmegaClass::Free => None,
        }
    }

    /// `log P(|xi_n|^2 <= cap^2) = log(1 - exp(-cap^2))` for capped classes.
    fn log_cap_prob(&self, n: usize) -> f64 {
        match self.class(n) {
            OmegaClass::Dominated => ln_one_minus_exp_neg((-2.0 * self.analysis.weight(n)).exp() / self.m),
            OmegaClass::Suppressed => ln_one_minus_exp_neg(1.0 / self.m),
            OmegaClass::Tail => ln_one_minus_exp_neg((self.delta * n as f64).exp()),
            OmegaClass::Constant | OmegaClass::Free => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OmegaComponents {
    pub constant: f64,
    pub dominated: f64,
    pub suppressed: f64,
    pub tail: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OmegaCertificate {
    pub r: f64,
    pub c0: f64,
    pub log_prob: f64,
    pub components: OmegaComponents,
    #[serde(rename = "S")]
    pub s: f64,
    /// `-log_prob - S`.
    pub margin: f64,
    pub m: u64,
    pub n: usize,
    /// Number of event (iv) factors summed before they fell below `1e-300`.
    pub tail_terms: usize,
}

/// Tail factors stop once past `Ñ_delta` and below this magnitude.
const TAIL_TERM_FLOOR: f64 = 1e-300;

pub fn omega_log_prob(model: &CoefficientModel, r: f64, c0: f64) -> Result<OmegaCertificate> {
    if !(c0 >= 0.0 && c0.is_finite()) {
        return crate::error::domain(format!("C0 must be finite and nonnegative, got {c0}"));
    }
    let classes = omega_classes(model, r)?;
    let constant = -c0 * c0 * classes.m.sqrt();
    let dominated = compensated_sum(classes.analysis.power_set.iter().filter(|&&n| n > 0).map(|&n| classes.log_cap_prob(n)));
    let suppressed = compensated_sum(
        classes
            .tilde
            .iter()
            .filter(|&&n| classes.class(n) == OmegaClass::Suppressed)
            .map(|&n| classes.log_cap_prob(n)),
    );

    let end = classes.structured_end();
    let degree = model.degree();
    let mut tail_terms = 0;
    let mut tail = Vec::new();
    let mut n = 1usize;
    loop {
        if degree.is_some_and(|d| n > d) {
            break;
        }
        if classes.class(n) == OmegaClass::Tail {
            let term = classes.log_cap_prob(n);
            tail_terms += 1;
            tail.push(term);
            if n > end && term.abs() < TAIL_TERM_FLOOR {
                break;
            }
        } else if n > end && (classes.delta * n as f64).exp() > 700.0 {
            // every later factor is below 1e-300 as well
            break;
        }
        n += 1;
    }
    let tail = compensated_sum(tail);

    let log_prob = constant + dominated + suppressed + tail;
    let s = classes.analysis.s_weight;
    Ok(OmegaCertificate {
        r,
        c0,
        log_prob,
        components: OmegaComponents { constant, dominated, suppressed, tail },
        s,
        margin: -log_prob - s,
        m: classes.analysis.m_mass,
        n: classes.analysis.n_count,
        tail_terms,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionalHoleReport {
    pub r: f64,
    pub c0: f64,
    pub trials: u64,
    pub holes: u64,
    pub not_holes: u64,
    pub ambiguous: u64,
    pub fraction: f64,
    pub k: usize,
}

/// Draws the coefficients from their exact `Ω_r`-conditioned laws and counts
/// the draws without zeros in `|z| < r`.
///
/// Under `|xi|^2 ~ Exp(1)` the conditioned moduli are `lambda^2 + Exp(1)` for
/// the lower bound of event (i) and `Exp(1)` truncated to `[0, lambda^2]` for
/// the caps; phases stay uniform.
pub fn conditional_hole_check(
    model: &CoefficientModel,
    r: f64,
    trials: u64,
    seed: u64,
    c0: f64,
    opts: &EstimatorOptions,
) -> Result<ConditionalHoleReport> {
    if trials == 0 {
        return crate::error::domain("trials must be positive");
    }
    let classes = omega_classes(model, r)?;
    let plan = truncation_plan(model, r, opts.eps_tail, opts.eps_fail)?;
    let margin = opts.margin.unwrap_or_else(|| default_margin(plan.eps_tail));
    let contour = Contour::new(model, r, plan.k, margin)?;
    let floor = classes.constant_floor(c0);
    let caps: Vec<Option<f64>> = (0..=plan.k).map(|n| classes.cap(n)).collect();

    let states = opts.workers.map_indexed(trials, |i| {
        let mut rng = stream(seed, i);
        let xi: Vec<Complex64> = caps
            .iter()
            .enumerate()
            .map(|(n, cap)| {
                let u = open01(&mut rng);
                let phase = uniform_phase(&mut rng);
                let sq = match (n, cap) {
                    (0, _) => floor * floor - u.ln(),
                    (_, Some(cap)) => -(u * (-cap * cap).exp_m1()).ln_1p(),
                    (_, None) => -u.ln(),
                };
                Complex64::from_polar(sq.sqrt(), phase)
            })
            .collect();
        let sample = SampleDraw { radius: r, xi, log_weight: 0.0, seed, stream_id: i };
        contour.scan(&sample).map(|scan| crate::zeros::classify(&scan))
    });

    let (mut holes, mut not_holes, mut ambiguous) = (0, 0, 0);
    for state in states {
        match state? {
            HoleState::Hole => holes += 1,
            HoleState::NotHole => not_holes += 1,
            HoleState::Ambiguous => ambiguous += 1,
        }
    }
    Ok(ConditionalHoleReport {
        r,
        c0,
        trials,
        holes,
        not_holes,
        ambiguous,
        fraction: holes as f64 / trials as f64,
        k: plan.k,
    })
}
