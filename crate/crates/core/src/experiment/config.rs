use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::benchmodels::Grid;
use crate::error::{Error, Result};
use crate::lra::LraConfig;
use crate::pce::PceConfig;
use crate::polybasis::PolyFamily;
use crate::probcore::{InputModel, SOBOL_MAX_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Beam,
    Truss {
        /// JSON layout file; the 23-bar Warren truss when absent.
        #[serde(default)]
        layout: Option<PathBuf>,
    },
    EoleDemo {
        grid: Grid,
        correlation_length: f64,
        #[serde(default = "default_variance_threshold")]
        variance_threshold: f64,
    },
    /// CSV with columns `x1..xM,y` of physical inputs and responses.
    ExternalTable { path: PathBuf },
}

fn default_variance_threshold() -> f64 {
    0.99
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Beam => "beam",
            Self::Truss { .. } => "truss",
            Self::EoleDemo { .. } => "eole-demo",
            Self::ExternalTable { .. } => "external-table",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignMethod {
    Sobol,
    Mcs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub method: DesignMethod,
    pub size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    /// Randomized designs.
    pub ed: u64,
    /// Cross-validation folds, validation sets and reliability sampling.
    pub analysis: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationSpec {
    pub size: usize,
}

impl Default for ValidationSpec {
    fn default() -> Self {
        Self { size: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceMethod {
    /// Analytical for the beam, importance sampling for the truss, Monte Carlo
    /// otherwise, none for tables.
    Auto,
    Analytical,
    Mcs,
    Is,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReliabilitySpec {
    /// Response thresholds, ascending; failure is `response >= threshold`.
    pub thresholds: Vec<f64>,
    /// Surrogate Monte Carlo sample size.
    #[serde(default = "default_mcs_samples")]
    pub mcs_samples: u64,
    #[serde(default = "default_reference")]
    pub reference: ReferenceMethod,
    /// Sample size of a Monte Carlo reference on the original model.
    #[serde(default = "default_reference_samples")]
    pub reference_samples: u64,
    #[serde(default = "default_is_batch")]
    pub is_batch: usize,
    #[serde(default = "default_target_cov")]
    pub target_cov: f64,
    #[serde(default = "default_max_batches")]
    pub max_batches: usize,
}

fn default_mcs_samples() -> u64 {
    10_000_000
}
fn default_reference() -> ReferenceMethod {
    ReferenceMethod::Auto
}
fn default_reference_samples() -> u64 {
    1_000_000
}
fn default_is_batch() -> usize {
    100
}
fn default_target_cov() -> f64 {
    0.1
}
fn default_max_batches() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KdeSpec {
    pub points: usize,
}

impl Default for KdeSpec {
    fn default() -> Self {
        Self { points: 256 }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub model: ModelSpec,
    /// Overrides the model's default input distribution; required for tables.
    #[serde(default)]
    pub input: Option<InputModel>,
    #[serde(default)]
    pub polynomials: Option<PolyFamily>,
    pub design: DesignSpec,
    pub seeds: Seeds,
    #[serde(default)]
    pub lra: LraConfig,
    #[serde(default)]
    pub pce: PceConfig,
    #[serde(default)]
    pub validation: ValidationSpec,
    #[serde(default)]
    pub reliability: Option<ReliabilitySpec>,
    #[serde(default)]
    pub kde: KdeSpec,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Reads a config file; model data paths are resolved against its directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        match &mut cfg.model {
            ModelSpec::Truss { layout: Some(p) } | ModelSpec::ExternalTable { path: p } if p.is_relative() => {
                *p = base.join(&*p);
            }
            _ => {}
        }
        if cfg.name.is_none() {
            cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(cfg)
    }

    pub fn family(&self) -> PolyFamily {
        self.polynomials.unwrap_or(PolyFamily::Hermite)
    }

    /// Checks everything that can be checked without evaluating the model.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        self.lra.validate()?;
        self.pce.validate()?;
        let min = 2 * self.lra.cv_folds;
        if self.design.size < min {
            return bad(format!("design size {} is below the minimum of {min}", self.design.size));
        }
        if self.kde.points < 2 {
            return bad("kde.points must be >= 2".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be >= 1".into());
        }
        if self.validation.size == 1 {
            return bad("validation.size must be 0 or >= 2".into());
        }
        if let Some(r) = &self.reliability {
            if r.thresholds.is_empty() || r.thresholds.iter().any(|t| !t.is_finite()) {
                return bad("reliability.thresholds must be nonempty and finite".into());
            }
            if r.thresholds.windows(2).any(|w| w[0] >= w[1]) {
                return bad("reliability.thresholds must be strictly ascending".into());
            }
            if r.mcs_samples == 0 || r.reference_samples == 0 || r.is_batch == 0 || r.max_batches == 0 {
                return bad("reliability sample sizes must be >= 1".into());
            }
            if !(r.target_cov > 0.0) {
                return bad("reliability.target_cov must be > 0".into());
            }
            let reference_ok = match (&self.model, r.reference) {
                (ModelSpec::ExternalTable { .. }, ReferenceMethod::Analytical | ReferenceMethod::Mcs | ReferenceMethod::Is) => false,
                (ModelSpec::Beam, _) => true,
                (_, ReferenceMethod::Analytical) => false,
                _ => true,
            };
            if !reference_ok {
                return bad(format!("reference {:?} is not available for {}", r.reference, self.model.name()));
            }
        }
        match &self.model {
            ModelSpec::Beam => self.check_input_dim(5)?,
            ModelSpec::Truss { layout } => {
                if let Some(p) = layout {
                    if !p.exists() {
                        return bad(format!("truss layout {} not found", p.display()));
                    }
                }
            }
            ModelSpec::EoleDemo { grid, correlation_length, variance_threshold } => {
                if grid.nx == 0 || grid.ny == 0 || !(grid.spacing > 0.0) {
                    return bad("eole grid needs nx, ny >= 1 and spacing > 0".into());
                }
                if !(*correlation_length > 0.0) || !(*variance_threshold > 0.0 && *variance_threshold <= 1.0) {
                    return bad("eole needs correlation_length > 0 and variance_threshold in (0, 1]".into());
                }
            }
            ModelSpec::ExternalTable { path } => {
                if self.input.is_none() {
                    return bad("external-table needs an [input] model".into());
                }
                if !path.exists() {
                    return bad(format!("table {} not found", path.display()));
                }
            }
        }
        if self.design.method == DesignMethod::Sobol {
            if let Some(im) = &self.input {
                if im.dim() > SOBOL_MAX_DIM {
                    return bad(format!("Sobol designs support at most {SOBOL_MAX_DIM} dimensions"));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn check_input_dim(&self, dim: usize) -> Result<()> {
        match &self.input {
            Some(im) if im.dim() != dim => Err(Error::InvalidParameter(format!(
                "input model has {} variables, {} takes {dim}",
                im.dim(),
                self.model.name()
            ))),
            _ => Ok(()),
        }
    }
}
