//! Experiment configuration: a TOML file with nested sections, parsed
//! strictly (unknown keys are rejected) so a typo cannot silently run a
//! different study than the one asked for.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mlsmc::allocation::RateParameters;
use mlsmc::engine::SmcConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SingleLevelSmc,
    MlsmcStandard,
    MlsmcTelescoped,
}

impl Method {
    pub fn all() -> Vec<Method> {
        vec![Method::SingleLevelSmc, Method::MlsmcStandard, Method::MlsmcTelescoped]
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Method::SingleLevelSmc => "single-level-smc",
            Method::MlsmcStandard => "mlsmc-standard",
            Method::MlsmcTelescoped => "mlsmc-telescoped",
        };
        f.write_str(name)
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ProblemSection {
    pub kind: ProblemKind,
    /// Finite-oracle only: path to the fixture file, relative to the
    /// config file's directory.
    #[serde(default)]
    pub fixture: Option<PathBuf>,
    /// Elliptic only: synthetic observations come from a solve at this
    /// level (finer than anything the samplers see).
    #[serde(default = "default_data_level")]
    pub data_level: usize,
    /// Elliptic only: seed of the observation noise stream.
    #[serde(default = "default_noise_seed")]
    pub noise_seed: u64,
    /// Hard cap on planner depth.
    #[serde(default = "default_level_cap")]
    pub level_cap: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Elliptic,
    FiniteOracle,
}

fn default_data_level() -> usize {
    10
}

fn default_noise_seed() -> u64 {
    2026
}

fn default_level_cap() -> usize {
    12
}

/// Mirror of `RateParameters` so the TOML schema stays strict and the
/// library type stays free of file-format concerns.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RatesSection {
    pub alpha: f64,
    pub beta: f64,
    pub zeta: f64,
    #[serde(default = "default_m_refine")]
    pub m_refine: u32,
    #[serde(default = "default_k_offset")]
    pub k_offset: u32,
}

fn default_m_refine() -> u32 {
    2
}

fn default_k_offset() -> u32 {
    3
}

impl RatesSection {
    pub fn to_rates(&self) -> RateParameters {
        RateParameters {
            alpha: self.alpha,
            beta: self.beta,
            zeta: self.zeta,
            m_refine: self.m_refine,
            k_offset: self.k_offset,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct StudySection {
    /// Target accuracies, strictly decreasing.
    pub epsilons: Vec<f64>,
    pub replicates: usize,
    #[serde(default = "Method::all")]
    pub methods: Vec<Method>,
    pub base_seed: u64,
    /// Proportionality constant in the sample-size law.
    #[serde(default = "default_sample_scale")]
    pub sample_scale: f64,
    /// Separate constant for the flat single-level baseline (N = scale * eps^-2).
    /// The multilevel law carries its own small variance constants, so matching
    /// realized accuracy per epsilon usually needs a much smaller value here.
    /// Defaults to sample-scale.
    pub single_level_scale: Option<f64>,
    /// Lower-bound multiplier c in N_l >= c*L + 1.
    #[serde(default = "default_floor_multiplier")]
    pub floor_multiplier: f64,
    pub out_dir: PathBuf,
}

impl StudySection {
    pub fn baseline_scale(&self) -> f64 {
        self.single_level_scale.unwrap_or(self.sample_scale)
    }
}

fn default_sample_scale() -> f64 {
    1.0
}

fn default_floor_multiplier() -> f64 {
    2.0
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct TruthSection {
    /// Reference runs go this many levels past the deepest study plan.
    pub level_offset: usize,
    pub replicates: usize,
    /// Reference runs use this multiple of the planner's sample sizes.
    pub sample_multiplier: f64,
}

impl Default for TruthSection {
    fn default() -> Self {
        Self { level_offset: 2, replicates: 200, sample_multiplier: 4.0 }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct EngineSection {
    pub mutation_sweeps: usize,
    pub init_oversample: usize,
    pub init_sweeps: usize,
}

impl Default for EngineSection {
    fn default() -> Self {
        let d = SmcConfig::default();
        Self {
            mutation_sweeps: d.mutation_sweeps,
            init_oversample: d.init_oversample,
            init_sweeps: d.init_sweeps,
        }
    }
}

impl EngineSection {
    pub fn to_smc_config(&self, evaluate_next_potential: bool) -> SmcConfig {
        SmcConfig {
            mutation_sweeps: self.mutation_sweeps,
            init_oversample: self.init_oversample,
            init_sweeps: self.init_sweeps,
            evaluate_next_potential,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct VarianceRateSection {
    pub min_level: usize,
    pub max_level: usize,
    pub replicates: usize,
    /// Flat particle count per level.
    pub particles: usize,
}

impl Default for VarianceRateSection {
    fn default() -> Self {
        Self { min_level: 1, max_level: 6, replicates: 100, particles: 100 }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub rates: RatesSection,
    pub study: StudySection,
    #[serde(default)]
    pub truth: TruthSection,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub variance_rate: VarianceRateSection,
}

/// A parsed config plus the provenance needed downstream: where it came
/// from and the digest of the exact bytes that produced it.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub dir: PathBuf,
    pub sha256: String,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let bytes = fs::read(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: ExperimentConfig = toml::from_str(
            std::str::from_utf8(&bytes).context("config is not UTF-8")?,
        )
        .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        let dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let sha256 = format!("{:x}", Sha256::digest(&bytes));
        Ok(LoadedConfig { config, dir, sha256 })
    }

    pub fn validate(&self) -> Result<()> {
        self.rates.to_rates().validate()?;
        let eps = &self.study.epsilons;
        if eps.is_empty() {
            bail!("epsilon grid is empty");
        }
        if eps.iter().any(|&e| !(e > 0.0)) {
            bail!("epsilon grid must be positive, got {eps:?}");
        }
        if eps.windows(2).any(|w| w[1] >= w[0]) {
            bail!("epsilon grid must be strictly decreasing, got {eps:?}");
        }
        if self.study.replicates < 2 {
            bail!("need at least 2 replicates, got {}", self.study.replicates);
        }
        if self.study.methods.is_empty() {
            bail!("method set is empty");
        }
        let mut seen = self.study.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.study.methods.len() {
            bail!("method set has duplicates: {:?}", self.study.methods);
        }
        if !(self.study.sample_scale > 0.0) {
            bail!("sample-scale must be positive");
        }
        if let Some(s) = self.study.single_level_scale {
            if !(s > 0.0) {
                bail!("single-level-scale must be positive");
            }
        }
        if self.problem.kind == ProblemKind::FiniteOracle && self.problem.fixture.is_none() {
            bail!("finite-oracle problems need a fixture path");
        }
        if self.problem.kind == ProblemKind::Elliptic && self.problem.fixture.is_some() {
            bail!("fixture is only meaningful for finite-oracle problems");
        }
        if self.truth.replicates < 2 {
            bail!("truth replicates must be >= 2");
        }
        if !(self.truth.sample_multiplier > 0.0) {
            bail!("truth sample-multiplier must be positive");
        }
        if self.variance_rate.min_level > self.variance_rate.max_level {
            bail!(
                "variance-rate level range is empty: {}..{}",
                self.variance_rate.min_level,
                self.variance_rate.max_level
            );
        }
        if self.variance_rate.replicates < 2 {
            bail!("variance-rate replicates must be >= 2");
        }
        if self.variance_rate.particles == 0 {
            bail!("variance-rate particle count must be positive");
        }
        Ok(())
    }
}

/// On-disk form of a finite-state fixture.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FixtureSpec {
    /// kappa[l][state], one row per density level.
    pub kappa: Vec<Vec<f64>>,
    pub kernels: KernelKind,
    #[serde(default)]
    pub mesh_widths: Option<Vec<f64>>,
    #[serde(default)]
    pub cost_zeta: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Independence,
    Metropolis,
}

impl FixtureSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading fixture {}", path.display()))?;
        let spec: FixtureSpec = toml::from_str(&text)
            .with_context(|| format!("parsing fixture {}", path.display()))?;
        Ok(spec)
    }
}
