//! Deterministic coefficient sequences `a_n` with `a_0 = 1`.
//!
//! Everything is kept in the natural-log domain; `a_n` itself is never
//! formed, since `1/sqrt(n!)` underflows long before the radii of interest
//! stop needing it.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Index set of a lacunary model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LacunarySupport {
    Rule(SupportRule),
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportRule {
    /// `{0} ∪ {2^k : k >= 0}`.
    PowersOfTwo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoefficientModel {
    /// `a_n = Γ(n+1)^(-alpha)`; `alpha = 1/2` is `1/sqrt(n!)`.
    GammaPower { alpha: f64 },
    /// Finite table of `log a_n`; `-inf` entries are zero coefficients.
    ExplicitTable { log_a: Vec<f64> },
    /// `a_n = 1/n!` on the support, zero elsewhere. Index 0 is always included.
    LacunaryGamma { support: LacunarySupport },
    ConstantOnly,
}

const MAX_DOUBLING: usize = 1 << 40;

impl CoefficientModel {
    pub fn gamma_power(alpha: f64) -> Result<Self> {
        let m = CoefficientModel::GammaPower { alpha };
        m.validate()?;
        Ok(m)
    }

    pub fn explicit_table(log_a: Vec<f64>) -> Result<Self> {
        let m = CoefficientModel::ExplicitTable { log_a };
        m.validate()?;
        Ok(m)
    }

    pub fn lacunary_powers_of_two() -> Self {
        CoefficientModel::LacunaryGamma {
            support: LacunarySupport::Rule(SupportRule::PowersOfTwo),
        }
    }

    pub fn lacunary(indices: Vec<usize>) -> Result<Self> {
        let m = CoefficientModel::LacunaryGamma {
            support: LacunarySupport::Explicit(indices),
        };
        m.validate()?;
        Ok(m)
    }

    /// Checks the normalization and entirety conditions a deserialized
    /// description might violate.
    pub fn validate(&self) -> Result<()> {
        match self {
            CoefficientModel::GammaPower { alpha } => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(Error::Model(format!("gamma-power needs alpha > 0, got {alpha}")));
                }
            }
            CoefficientModel::ExplicitTable { log_a } => {
                if log_a.first() != Some(&0.0) {
                    return Err(Error::Model("explicit-table needs log_a[0] = 0 (a_0 = 1)".into()));
                }
                if let Some(bad) = log_a.iter().find(|x| x.is_nan() || **x == f64::INFINITY) {
                    return Err(Error::Model(format!("explicit-table entry {bad} is not allowed")));
                }
            }
            CoefficientModel::LacunaryGamma { .. } | CoefficientModel::ConstantOnly => {}
        }
        Ok(())
    }

    /// Short stable identifier used in result files.
    pub fn label(&self) -> String {
        match self {
            CoefficientModel::GammaPower { alpha } => format!("gamma-power(alpha={alpha})"),
            CoefficientModel::ExplicitTable { log_a } => format!("explicit-table(len={})", log_a.len()),
            CoefficientModel::LacunaryGamma { support: LacunarySupport::Rule(SupportRule::PowersOfTwo) } => {
                "lacunary-gamma(powers-of-two)".into()
            }
            CoefficientModel::LacunaryGamma { support: LacunarySupport::Explicit(s) } => {
                format!("lacunary-gamma(len={})", s.len())
            }
            CoefficientModel::ConstantOnly => "constant-only".into(),
        }
    }

    /// `log a_n`, with `-inf` for a zero coefficient.
    pub fn log_coeff(&self, n: i64) -> Result<f64> {
        if n < 0 {
            return Err(Error::Domain(format!("coefficient index must be nonnegative, got {n}")));
        }
        Ok(self.ln_a(n as usize))
    }

    /// Infallible form of [`log_coeff`](Self::log_coeff).
    pub fn ln_a(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match self {
            CoefficientModel::GammaPower { alpha } => -alpha * ln_gamma(n as f64 + 1.0),
            CoefficientModel::ExplicitTable { log_a } => log_a.get(n).copied().unwrap_or(f64::NEG_INFINITY),
            CoefficientModel::LacunaryGamma { support } => {
                if lacunary_contains(support, n) {
                    -ln_gamma(n as f64 + 1.0)
                } else {
                    f64::NEG_INFINITY
                }
            }
            CoefficientModel::ConstantOnly => f64::NEG_INFINITY,
        }
    }

    /// `w_n(r) = log(a_n r^n)`. Defined for every `r > 0`; the public
    /// radial operations restrict to `r >= 1`.
    #[inline]
    pub fn log_weight(&self, n: usize, r: f64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let la = self.ln_a(n);
        if la == f64::NEG_INFINITY {
            return la;
        }
        la + n as f64 * r.ln()
    }

    /// A pointwise upper bound on `log a_n` that is concave in `n` (or `-inf`
    /// past a finite support). Tail bounds are taken against it.
    pub fn log_envelope(&self, n: usize) -> f64 {
        match self {
            CoefficientModel::LacunaryGamma { support: LacunarySupport::Rule(_) } => {
                if n == 0 {
                    0.0
                } else {
                    -ln_gamma(n as f64 + 1.0)
                }
            }
            _ => self.ln_a(n),
        }
    }

    /// Highest index with a nonzero coefficient, when the support is finite.
    pub fn degree(&self) -> Option<usize> {
        match self {
            CoefficientModel::GammaPower { .. } => None,
            CoefficientModel::ExplicitTable { log_a } => {
                Some(log_a.iter().rposition(|x| *x > f64::NEG_INFINITY).unwrap_or(0))
            }
            CoefficientModel::LacunaryGamma { support: LacunarySupport::Rule(_) } => None,
            CoefficientModel::LacunaryGamma { support: LacunarySupport::Explicit(s) } => {
                Some(s.iter().copied().max().unwrap_or(0))
            }
            CoefficientModel::ConstantOnly => Some(0),
        }
    }

    /// Index bound past which `w_n(r) < 0` is guaranteed.
    ///
    /// Finite supports return their degree. Otherwise the concave envelope is
    /// searched by doubling for the first index where it is both negative and
    /// decreasing; concavity keeps it so from there on.
    pub fn cutoff_hint(&self, r: f64) -> Result<usize> {
        if let Some(d) = self.degree() {
            return Ok(d);
        }
        let env = |n: usize| self.log_envelope(n) + n as f64 * r.ln();
        let settled = |n: usize| {
            let w = env(n);
            w < 0.0 && env(n + 1) < w
        };
        let mut hi = 1usize;
        while !settled(hi) {
            if hi >= MAX_DOUBLING {
                return Err(Error::PlanConstruction(format!(
                    "no cutoff envelope found for {} at r = {r}",
                    self.label()
                )));
            }
            hi *= 2;
        }
        let mut lo = hi / 2;
        // settled(lo) is false unless lo == 0 or hi == 1
        if lo == 0 {
            return Ok(hi);
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if settled(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

fn lacunary_contains(support: &LacunarySupport, n: usize) -> bool {
    match support {
        LacunarySupport::Rule(SupportRule::PowersOfTwo) => n.is_power_of_two(),
        LacunarySupport::Explicit(s) => s.contains(&n),
    }
}
