//! Experiment configuration files.
//!
//! Configs are TOML: top-level keys pick the experiment, `[chain]` and
//! `[weighted]` set the sampler, and one model section matching `kind` sets
//! the model. Unknown keys, and model sections for a different kind, are
//! rejected.
//!
//! ```toml
//! kind = "gaussian"
//! schedulers = ["systematic", "random", "weighted"]
//!
//! [chain]
//! unit = "step"
//! iterations = 20000
//! burn_in = 2000
//! seed = 7
//!
//! [gaussian]
//! d = 50
//! r = 5
//! epsilon = 5.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use weighted_gibbs::{
    ChainConfig, Lambda, Scheduler, SystematicScheduler, UniformScheduler, WeightedScheduler,
    WeightedSchedulerConfig,
};

use crate::error::{CliError, CliResult};

/// Environment variable naming the directory under which runs without an
/// explicit `output` are written.
pub const OUT_ROOT_ENV: &str = "WGIBBS_OUT_ROOT";
pub const DEFAULT_OUT_ROOT: &str = "wgibbs-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Gaussian,
    Ising,
    Lda,
    Validate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Gaussian => "gaussian",
            ExperimentKind::Ising => "ising",
            ExperimentKind::Lda => "lda",
            ExperimentKind::Validate => "validate",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    Systematic,
    Random,
    Weighted,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 3] = [
        SchedulerKind::Systematic,
        SchedulerKind::Random,
        SchedulerKind::Weighted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerKind::Systematic => "systematic",
            SchedulerKind::Random => "random",
            SchedulerKind::Weighted => "weighted",
        }
    }
}

/// What one iteration counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainUnit {
    /// `d` single-variable updates (for LDA, one update per document).
    #[default]
    Sweep,
    /// One single-variable update.
    Step,
}

/// Chain lengths are in iterations of `unit`; `initial_sweeps` is always in
/// sweeps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSection {
    pub unit: ChainUnit,
    pub iterations: u64,
    pub burn_in: u64,
    pub thinning: u64,
    pub seed: u64,
    pub initial_sweeps: u64,
}

impl Default for ChainSection {
    fn default() -> Self {
        Self {
            unit: ChainUnit::Sweep,
            iterations: 1000,
            burn_in: 0,
            thinning: 1,
            seed: 1,
            initial_sweeps: ChainConfig::DEFAULT_INITIAL_SWEEPS,
        }
    }
}

impl ChainSection {
    pub fn steps_per_iteration(&self, dimension: usize) -> u64 {
        match self.unit {
            ChainUnit::Sweep => dimension as u64,
            ChainUnit::Step => 1,
        }
    }

    pub fn to_chain_config(&self, dimension: usize) -> CliResult<ChainConfig> {
        if self.iterations == 0 {
            return Err(CliError::Config("chain.iterations must be positive".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(CliError::Config(format!(
                "chain.burn_in ({}) must be below chain.iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thinning == 0 {
            return Err(CliError::Config("chain.thinning must be positive".into()));
        }
        let n = self.steps_per_iteration(dimension);
        Ok(ChainConfig::new(self.iterations * n, self.seed)
            .with_burn_in(self.burn_in * n)
            .with_thinning(self.thinning * n)
            .with_initial_sweeps(self.initial_sweeps))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaMode {
    /// `lambda` multiplies the mean of `sqrt(d_hat)`.
    Relative,
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightedSection {
    pub lambda: f64,
    pub lambda_mode: LambdaMode,
    /// Single-variable steps between refreshes; defaults to `d`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub update_period: Option<u64>,
    pub adapt_after_burn_in: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forgetting: Option<f64>,
    /// Iterations between rows of `weights.csv`.
    pub snapshot_every: u64,
}

impl Default for WeightedSection {
    fn default() -> Self {
        Self {
            lambda: Lambda::DEFAULT_RELATIVE,
            lambda_mode: LambdaMode::Relative,
            update_period: None,
            adapt_after_burn_in: true,
            forgetting: None,
            snapshot_every: 10,
        }
    }
}

impl WeightedSection {
    pub fn scheduler_config(&self) -> WeightedSchedulerConfig {
        WeightedSchedulerConfig {
            update_period: self.update_period,
            lambda: match self.lambda_mode {
                LambdaMode::Relative => Lambda::Relative(self.lambda),
                LambdaMode::Fixed => Lambda::Fixed(self.lambda),
            },
            adapt_after_burn_in: self.adapt_after_burn_in,
            forgetting: self.forgetting,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaussianSection {
    pub d: usize,
    pub r: usize,
    pub epsilon: f64,
    pub lambda_cov: f64,
    /// Every chain starts at `init_scale * sqrt(Sigma_ii)` in each coordinate.
    pub init_scale: f64,
    pub max_lag: usize,
    /// ESJD lags, in recorded rows.
    pub esjd_lags: Vec<usize>,
    /// Leading recorded states kept in `pca_trace.csv`.
    pub pca_samples: usize,
}

impl Default for GaussianSection {
    fn default() -> Self {
        Self {
            d: 50,
            r: 5,
            epsilon: 5.0,
            lambda_cov: 10.0,
            init_scale: 5.0,
            max_lag: 20,
            esjd_lags: vec![1, 5, 10],
            pca_samples: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IsingSection {
    /// Grayscale PGM; a synthetic portrait of side `size` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    pub size: usize,
    pub coupling: f64,
    pub sigma: f64,
    /// Iterations between rows of `error.csv`.
    pub eval_every: u64,
}

impl Default for IsingSection {
    fn default() -> Self {
        Self {
            image: None,
            size: 64,
            coupling: 1.0,
            sigma: 1.0,
            eval_every: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LdaSection {
    /// `"bars"` for the synthetic corpus, otherwise a corpus file.
    pub corpus: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vocabulary: Option<PathBuf>,
    /// Held-out corpus file; without one the last `heldout_documents`
    /// training documents are held out (bars generates extra documents).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heldout: Option<PathBuf>,
    pub heldout_documents: usize,
    pub documents: usize,
    pub document_length: usize,
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub eval_every: u64,
    pub perplexity_every: u64,
    pub fold_in_sweeps: usize,
}

impl Default for LdaSection {
    fn default() -> Self {
        Self {
            corpus: "bars".into(),
            vocabulary: None,
            heldout: None,
            heldout_documents: 200,
            documents: weighted_gibbs::models::lda::BARS_DOCUMENTS,
            document_length: weighted_gibbs::models::lda::BARS_DOCUMENT_LENGTH,
            topics: 8,
            alpha: 0.5,
            beta: 0.1,
            eval_every: 1,
            perplexity_every: 10,
            fold_in_sweeps: weighted_gibbs::diagnostics::FOLD_IN_SWEEPS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    pub chains: usize,
    pub weight_vectors: usize,
    pub esjd_configs: usize,
    pub trials: usize,
    /// Single-variable steps of each product-target chain.
    pub chain_steps: u64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            chains: 50,
            weight_vectors: 100,
            esjd_configs: 20,
            trials: 100_000,
            chain_steps: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "all_schedulers")]
    pub schedulers: Vec<SchedulerKind>,
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default)]
    pub weighted: WeightedSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian: Option<GaussianSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ising: Option<IsingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lda: Option<LdaSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateSection>,
}

fn all_schedulers() -> Vec<SchedulerKind> {
    SchedulerKind::ALL.to_vec()
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            output: None,
            schedulers: all_schedulers(),
            chain: ChainSection::default(),
            weighted: WeightedSection::default(),
            gaussian: None,
            ising: None,
            lda: None,
            validate: None,
        }
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let config: Self =
            toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Structural checks that need no model: section/kind agreement and
    /// scheduler list sanity.
    pub fn check(&self) -> CliResult<()> {
        let present = [
            (ExperimentKind::Gaussian, self.gaussian.is_some()),
            (ExperimentKind::Ising, self.ising.is_some()),
            (ExperimentKind::Lda, self.lda.is_some()),
            (ExperimentKind::Validate, self.validate.is_some()),
        ];
        for (kind, is_set) in present {
            if is_set && kind != self.kind {
                return Err(CliError::Config(format!(
                    "section [{}] does not apply to kind = \"{}\"",
                    kind.name(),
                    self.kind.name()
                )));
            }
        }
        if self.kind != ExperimentKind::Validate {
            if self.schedulers.is_empty() {
                return Err(CliError::Config("schedulers must not be empty".into()));
            }
            let mut seen = self.schedulers.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != self.schedulers.len() {
                return Err(CliError::Config(
                    "schedulers lists a scheduler twice".into(),
                ));
            }
        }
        if self.weighted.snapshot_every == 0 {
            return Err(CliError::Config(
                "weighted.snapshot_every must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn gaussian(&self) -> GaussianSection {
        self.gaussian.clone().unwrap_or_default()
    }

    pub fn ising(&self) -> IsingSection {
        self.ising.clone().unwrap_or_default()
    }

    pub fn lda(&self) -> LdaSection {
        self.lda.clone().unwrap_or_default()
    }

    pub fn validate(&self) -> ValidateSection {
        self.validate.clone().unwrap_or_default()
    }

    /// Output directory: the configured one, else `<root>/<name>`.
    pub fn output_dir(&self, root: &Path, name: &str) -> PathBuf {
        match &self.output {
            Some(p) => p.clone(),
            None => root.join(name),
        }
    }

    /// True when the two configs describe the same experiment; only the
    /// output location and scheduler list may differ.
    pub fn same_experiment(&self, other: &Self) -> bool {
        let strip = |c: &Self| Self {
            output: None,
            schedulers: Vec::new(),
            gaussian: (c.kind == ExperimentKind::Gaussian).then(|| c.gaussian()),
            ising: (c.kind == ExperimentKind::Ising).then(|| c.ising()),
            lda: (c.kind == ExperimentKind::Lda).then(|| c.lda()),
            validate: (c.kind == ExperimentKind::Validate).then(|| c.validate()),
            ..c.clone()
        };
        strip(self) == strip(other)
    }
}

pub fn make_scheduler(
    kind: SchedulerKind,
    dimension: usize,
    weighted: &WeightedSection,
) -> CliResult<Box<dyn Scheduler>> {
    Ok(match kind {
        SchedulerKind::Systematic => Box::new(SystematicScheduler::new(dimension)),
        SchedulerKind::Random => Box::new(UniformScheduler::new(dimension)),
        SchedulerKind::Weighted => Box::new(
            WeightedScheduler::new(dimension, weighted.scheduler_config())
                .map_err(|e| CliError::Config(format!("[weighted]: {e}")))?,
        ),
    })
}
