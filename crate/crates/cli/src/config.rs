//! Experiment configuration (TOML).
//!
//! ```toml
//! seed = 7                                  # required by estimate/certify/diagnose
//! threads = 4                               # optional; default uses all cores
//! model = { kind = "gamma-power", alpha = 0.5 }
//! radii = { values = [1.5, 2.0] }           # or { start = 1.5, stop = 3.0, count = 5 }
//! model_id = "gef"                          # optional; default is the model label
//! format = "csv"                            # csv | json-lines; certify is always json-lines
//! out = "results.csv"                       # optional; --out overrides, stdout otherwise
//!
//! [sampler]
//! eps_tail = 1e-8
//! eps_fail = 1e-10
//!
//! [estimate]
//! trials = 100000
//! methods = ["naive", "importance"]
//! ```
//!
//! Every section is optional; defaults are listed on the fields below.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gaf_hole::CoefficientModel;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: CoefficientModel,
    #[serde(default)]
    pub radii: Option<Radii>,
    pub model_id: Option<String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub estimate: EstimateSection,
    #[serde(default)]
    pub certify: CertifySection,
    #[serde(default)]
    pub diagnose: DiagnoseSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    JsonLines,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Radii {
    List { values: Vec<f64> },
    Geometric { start: f64, stop: f64, count: usize },
}

impl Radii {
    pub fn expand(&self) -> Result<Vec<f64>> {
        let values = match self {
            Radii::List { values } => values.clone(),
            Radii::Geometric { start, stop, count } => {
                if *count == 0 || !(*start > 0.0 && *stop >= *start) {
                    bail!("radii: geometric range needs 0 < start <= stop and count >= 1");
                }
                if *count == 1 {
                    vec![*start]
                } else {
                    let ratio = (stop / start).ln() / (*count - 1) as f64;
                    (0..*count).map(|i| start * (ratio * i as f64).exp()).collect()
                }
            }
        };
        for (i, r) in values.iter().enumerate() {
            if !(*r > 0.0 && r.is_finite()) {
                bail!("radii[{i}] = {r}: radii must be positive and finite");
            }
        }
        if values.is_empty() {
            bail!("radii: at least one radius is required");
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    /// Sup-norm tail budget on the disk. Default `1e-8`.
    pub eps_tail: f64,
    /// Probability budget for the tail thresholds. Default `1e-10`.
    pub eps_fail: f64,
    /// Ambiguity margin on `log|f|`; default `ln(1e3 eps_tail)`.
    pub margin: Option<f64>,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection { eps_tail: 1e-8, eps_fail: 1e-10, margin: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    /// Default `0.25`.
    pub delta_fraction: f64,
    /// Default `0.25`.
    pub max_log_step: f64,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection { r_min: None, r_max: None, delta_fraction: 0.25, max_log_step: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Naive,
    Importance,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSection {
    /// Default `100000`.
    pub trials: u64,
    /// Default `["naive"]`.
    pub methods: Vec<MethodName>,
    /// Constant of event (i). Default `4`.
    pub c0: f64,
    /// Exponent applied to the constant and dominated scales. Default `1/3`.
    pub tilt_exponent: f64,
    /// Default `true`.
    pub release_suppressed: bool,
    /// Band constant for `summarize`. Default `10`.
    pub c_band: f64,
    /// Default `false`.
    pub self_normalized: bool,
}

impl Default for EstimateSection {
    fn default() -> Self {
        EstimateSection {
            trials: 100_000,
            methods: vec![MethodName::Naive],
            c0: 4.0,
            tilt_exponent: 1.0 / 3.0,
            release_suppressed: true,
            c_band: 10.0,
            self_normalized: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckName {
    Omega,
    Conditional,
    Vandermonde,
    Covariance,
    Volume,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifySection {
    /// Default `["omega", "conditional", "vandermonde", "covariance"]`.
    /// `volume` also needs the `[certify.volume]` table.
    pub checks: Vec<CheckName>,
    /// Default `4`.
    pub c0: f64,
    /// Band constant for the omega margin. Default `10`.
    pub c_band: f64,
    /// Draws for the conditional hole check. Default `1000`.
    pub trials: u64,
    /// Default `1000`.
    pub max_tries: u32,
    pub volume: Option<VolumeSection>,
}

impl Default for CertifySection {
    fn default() -> Self {
        CertifySection {
            checks: vec![CheckName::Omega, CheckName::Conditional, CheckName::Vandermonde, CheckName::Covariance],
            c0: 4.0,
            c_band: 10.0,
            trials: 1000,
            max_tries: 1000,
            volume: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeSection {
    pub dim: u32,
    pub s: f64,
    pub t: f64,
    #[serde(default = "default_volume_trials")]
    pub trials: u64,
}

fn default_volume_trials() -> u64 {
    1_000_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseSection {
    /// Default `10000`.
    pub trials: u64,
    /// Angular grid for `M(r)`; default `8 (max N(r) + 1)`.
    pub grid_size: Option<usize>,
    /// Log-derivative circle `rho = rho_fraction * r`. Default `0.5`.
    pub rho_fraction: f64,
    /// Default `512`.
    pub deriv_grid: usize,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        DiagnoseSection { trials: 10_000, grid_size: None, rho_fraction: 0.5, deriv_grid: 512 }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.model.validate().context("model")?;
        Ok(config)
    }

    pub fn model_id(&self) -> String {
        self.model_id.clone().unwrap_or_else(|| self.model.label())
    }

    pub fn radii(&self) -> Result<Vec<f64>> {
        match &self.radii {
            Some(r) => r.expand(),
            None => bail!("radii: this subcommand needs a radius list"),
        }
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.context("seed: stochastic subcommands need a seed (config `seed` or --seed)")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = ExperimentConfig::parse("model = { kind = \"constant-only\" }\nradii = { values = [1.0, 2.0] }").unwrap();
        assert_eq!(c.radii().unwrap(), vec![1.0, 2.0]);
        assert!(c.require_seed().is_err());
        assert_eq!(c.estimate.trials, 100_000);
    }

    #[test]
    fn geometric_radii() {
        let c = ExperimentConfig::parse(
            "seed = 1\nmodel = { kind = \"gamma-power\", alpha = 0.5 }\nradii = { start = 1.0, stop = 4.0, count = 3 }",
        )
        .unwrap();
        let r = c.radii().unwrap();
        assert_eq!(r.len(), 3);
        assert!((r[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn shipped_configs_parse() {
        for text in [
            include_str!("../../../configs/gamma-half.toml"),
            include_str!("../../../configs/gamma-half-certify.toml"),
            include_str!("../../../configs/lacunary.toml"),
            include_str!("../../../configs/volume.toml"),
        ] {
            let c = ExperimentConfig::parse(text).unwrap();
            assert!(c.require_seed().is_ok());
        }
    }

    #[test]
    fn rejects_unknown_fields_and_bad_models() {
        assert!(ExperimentConfig::parse("model = { kind = \"constant-only\" }\ntrails = 3").is_err());
        assert!(ExperimentConfig::parse("model = { kind = \"gamma-power\", alpha = -1.0 }").is_err());
        let c = ExperimentConfig::parse("model = { kind = \"constant-only\" }\nradii = { values = [-1.0] }").unwrap();
        let err = c.radii().unwrap_err().to_string();
        assert!(err.contains("radii[0]"), "{err}");
    }
}
