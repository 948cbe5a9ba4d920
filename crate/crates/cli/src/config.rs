//! Experiment configuration files.
//!
//! A config is a TOML document that fully determines a run. Unknown keys are
//! rejected everywhere: a misspelled option in a stochastic study would
//! otherwise go unnoticed. The manifest written next to every run's outputs is
//! itself a valid config.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "normal")]
    Normal,
    #[serde(rename = "gk")]
    Gk,
    #[serde(rename = "arch")]
    Arch,
    #[serde(rename = "garch")]
    Garch,
    #[serde(rename = "popgen-A")]
    PopGenA,
    #[serde(rename = "popgen-B")]
    PopGenB,
}

impl Model {
    pub fn param_names(self) -> Vec<String> {
        let names: &[&str] = match self {
            Model::Normal => &["mu"],
            Model::Gk => &["A", "B", "g", "k"],
            Model::Arch => &["alpha0", "alpha1"],
            Model::Garch => &["alpha0", "alpha1", "beta1"],
            Model::PopGenA => &["theta", "tau"],
            Model::PopGenB => &["theta", "tau1", "tau2"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn dim(self) -> usize {
        self.param_names().len()
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Model::Normal => "normal",
            Model::Gk => "gk",
            Model::Arch => "arch",
            Model::Garch => "garch",
            Model::PopGenA => "popgen-A",
            Model::PopGenB => "popgen-B",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Bcel,
    BcelAmis,
    Abc,
    /// Point mass at the true parameter; a zero-error reference for replicate studies.
    Truth,
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MethodKind::Bcel => "bcel",
            MethodKind::BcelAmis => "bcel-amis",
            MethodKind::Abc => "abc",
            MethodKind::Truth => "truth",
        })
    }
}

impl FromStr for MethodKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "bcel" => Ok(MethodKind::Bcel),
            "bcel-amis" => Ok(MethodKind::BcelAmis),
            "abc" => Ok(MethodKind::Abc),
            "truth" => Ok(MethodKind::Truth),
            other => Err(CliError::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    /// Simulate from the model at `truth`.
    Simulate {
        truth: Vec<f64>,
        /// Sample size or series length; unused for popgen.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        individuals_per_pop: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        loci: Option<usize>,
        /// Defaults to the run seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Read from disk; relative paths are resolved against the config file.
    File {
        path: PathBuf,
        /// Known true parameter, if any, for reference in outputs.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truth: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    Identity,
    Log10,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorBlockConfig {
    Uniform {
        lo: Vec<f64>,
        hi: Vec<f64>,
        #[serde(default = "identity")]
        transform: TransformKind,
    },
    Exponential {
        rate: f64,
    },
    Dirichlet {
        alpha: Vec<f64>,
    },
}

fn identity() -> TransformKind {
    TransformKind::Identity
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixtureKind {
    Full,
    PastOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// Particles per iteration.
    #[serde(default = "default_m")]
    pub m: usize,
    /// AMIS iterations.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_mixture")]
    pub mixture: MixtureKind,
    /// Credible mass of reported intervals.
    #[serde(default = "default_cred")]
    pub cred: f64,
}

fn default_m() -> usize {
    10_000
}
fn default_iterations() -> usize {
    5
}
fn default_mixture() -> MixtureKind {
    MixtureKind::Full
}
fn default_cred() -> f64 {
    0.8
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { m: default_m(), iterations: default_iterations(), mixture: default_mixture(), cred: default_cred() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchVariantKind {
    Moments,
    Correlations,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOptions {
    /// Normal model: number of moment constraints (1 to 3).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<usize>,
    /// g-and-k: number of equispaced percentiles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percentiles: Option<usize>,
    /// g-and-k asymmetry constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gk_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arch_variant: Option<ArchVariantKind>,
    /// Popgen: restrict the theta score to same-deme pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_same_pop_only: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceKind {
    Euclidean,
    MahalanobisDiagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbcSection {
    /// Summary statistic set; defaults per model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(default = "default_distance")]
    pub distance: DistanceKind,
    /// Acceptance fraction. Exactly one of `quantile` and `epsilon` may be set;
    /// with neither, `quantile = 0.01`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantile: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Simulation cap in epsilon mode.
    #[serde(default = "default_max_sims")]
    pub max_sims: usize,
    /// Accepted sample size.
    #[serde(default = "default_abc_m")]
    pub m: usize,
}

fn default_distance() -> DistanceKind {
    DistanceKind::MahalanobisDiagonal
}
fn default_max_sims() -> usize {
    1_000_000
}
fn default_abc_m() -> usize {
    100
}

impl Default for AbcSection {
    fn default() -> Self {
        Self {
            summary: None,
            distance: default_distance(),
            quantile: None,
            epsilon: None,
            max_sims: default_max_sims(),
            m: default_abc_m(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicateSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    /// Methods compared; defaults to `abc` plus the config's `method`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<MethodKind>>,
}

/// Version stamp written into manifests; ignored when a manifest is re-run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestStamp {
    pub bcel_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    pub method: MethodKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub data: DataSource,
    #[serde(default)]
    pub sampler: SamplerConfig,
    /// Independent prior blocks in parameter order; defaults per model.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prior: Vec<PriorBlockConfig>,
    #[serde(default)]
    pub options: ModelOptions,
    #[serde(default)]
    pub abc: AbcSection,
    #[serde(default)]
    pub replicate: ReplicateSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<ManifestStamp>,
    /// Directory of the file this config was read from.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// The truth, when the data are simulated or the file names one.
    pub fn truth(&self) -> Option<&[f64]> {
        match &self.data {
            DataSource::Simulate { truth, .. } => Some(truth),
            DataSource::File { truth, .. } => truth.as_deref(),
        }
    }

    pub fn data_path(&self) -> Option<PathBuf> {
        match &self.data {
            DataSource::File { path, .. } if path.is_relative() => {
                Some(self.base_dir.as_ref().map_or_else(|| path.clone(), |b| b.join(path)))
            }
            DataSource::File { path, .. } => Some(path.clone()),
            DataSource::Simulate { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let dim = self.model.dim();
        if let Some(t) = self.truth() {
            if t.len() != dim {
                return bad(format!("model {} has {dim} parameters, truth has {}", self.model, t.len()));
            }
        }
        if let DataSource::Simulate { n, .. } = &self.data {
            let needs_n = !matches!(self.model, Model::PopGenA | Model::PopGenB);
            if needs_n && n.unwrap_or(0) == 0 {
                return bad(format!("model {} needs a positive data.n", self.model));
            }
        }
        if self.sampler.m == 0 || self.sampler.iterations == 0 {
            return bad("sampler.m and sampler.iterations must be positive".into());
        }
        if !(self.sampler.cred > 0.0 && self.sampler.cred < 1.0) {
            return bad(format!("sampler.cred must lie in (0, 1), got {}", self.sampler.cred));
        }
        if self.abc.quantile.is_some() && self.abc.epsilon.is_some() {
            return bad("set at most one of abc.quantile and abc.epsilon".into());
        }
        if let Some(q) = self.abc.quantile {
            if !(q > 0.0 && q <= 1.0) {
                return bad(format!("abc.quantile must lie in (0, 1], got {q}"));
            }
        }
        if let Some(o) = self.options.moments {
            if !(1..=3).contains(&o) {
                return bad(format!("options.moments must be 1, 2 or 3, got {o}"));
            }
        }
        if self.options.percentiles == Some(0) {
            return bad("options.percentiles must be positive".into());
        }
        if let Some(r) = self.replicate.replicates {
            if r == 0 {
                return bad("replicate.replicates must be positive".into());
            }
        }
        if let Some(s) = &self.abc.summary {
            s.parse::<bcel_core::samplers::SummaryStat>().map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }
}
