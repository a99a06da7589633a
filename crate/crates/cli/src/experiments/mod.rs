//! Experiment runners. Each experiment builds one model and one initial
//! state from the config, then runs every listed scheduler against them from
//! the same seed, so the runs differ only in scan order.

pub mod gaussian;
pub mod ising;
pub mod lda;
pub mod validate;

use std::path::{Path, PathBuf};

use rand::Rng;
use weighted_gibbs::{GibbsModel, SummaryKind};

use crate::config::{ExperimentConfig, ExperimentKind, SchedulerKind};
use crate::error::CliResult;
use crate::output;

/// Auxiliary random streams, all derived from `chain.seed`.
pub(crate) mod streams {
    /// Model construction: covariance, image noise, corpus generation.
    pub const DATA: u64 = 0;
    /// Held-out documents.
    pub const HELDOUT: u64 = 1;
    /// Initial LDA assignments.
    pub const INIT: u64 = 2;
    /// Evaluation at iteration `t` uses stream `EVAL + t`, shared by all
    /// schedulers.
    pub const EVAL: u64 = 1 << 20;
}

/// Run every scheduler of `config` into `out/<scheduler>/`, chains in
/// parallel. Returns the directories written.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> CliResult<Vec<PathBuf>> {
    config.check()?;
    output::create_dir(out)?;
    if config.kind == ExperimentKind::Validate {
        let report = validate::run(config)?;
        validate::write(&report, config, out)?;
        report.print();
        report.ensure_passed()?;
        return Ok(vec![out.to_path_buf()]);
    }
    let dirs: Vec<PathBuf> = config
        .schedulers
        .iter()
        .map(|s| out.join(s.name()))
        .collect();
    for d in &dirs {
        output::create_dir(d)?;
        output::write_text(&d.join("config.toml"), &config.to_toml())?;
    }
    match config.kind {
        ExperimentKind::Gaussian => {
            let setup = gaussian::Setup::new(config)?;
            in_parallel(&config.schedulers, &dirs, |kind, dir| {
                let outcome = gaussian::run(&setup, config, kind)?;
                gaussian::write(&outcome, &setup, config, dir)
            })?;
        }
        ExperimentKind::Ising => {
            let setup = ising::Setup::new(config)?;
            setup.write_inputs(out)?;
            in_parallel(&config.schedulers, &dirs, |kind, dir| {
                let outcome = ising::run(&setup, config, kind)?;
                ising::write(&outcome, &setup, config, dir)
            })?;
        }
        ExperimentKind::Lda => {
            let setup = lda::Setup::new(config)?;
            in_parallel(&config.schedulers, &dirs, |kind, dir| {
                let outcome = lda::run(&setup, config, kind)?;
                lda::write(&outcome, &setup, config, dir)
            })?;
        }
        ExperimentKind::Validate => unreachable!(),
    }
    Ok(dirs)
}

/// A model whose states are observed but not stored in the trace.
pub(crate) struct Unrecorded<'a, M>(pub &'a M);

impl<M: GibbsModel> GibbsModel for Unrecorded<'_, M> {
    type State = M::State;

    fn dimension(&self) -> usize {
        self.0.dimension()
    }

    fn update<R: Rng + ?Sized>(&self, state: &mut Self::State, index: usize, rng: &mut R) {
        self.0.update(state, index, rng)
    }

    fn scalar_summary(&self, state: &Self::State, index: usize) -> f64 {
        self.0.scalar_summary(state, index)
    }

    fn summary_kind(&self) -> SummaryKind {
        self.0.summary_kind()
    }

    fn record_width(&self) -> usize {
        0
    }

    fn record(&self, _state: &Self::State, _out: &mut Vec<f64>) {}

    fn unnormalized_log_density(&self, state: &Self::State) -> Option<f64> {
        self.0.unnormalized_log_density(state)
    }
}

fn in_parallel<F>(kinds: &[SchedulerKind], dirs: &[PathBuf], job: F) -> CliResult<()>
where
    F: Fn(SchedulerKind, &Path) -> CliResult<()> + Sync,
{
    let results: Vec<CliResult<()>> = std::thread::scope(|scope| {
        let handles: Vec<_> = kinds
            .iter()
            .zip(dirs)
            .map(|(&k, d)| {
                let job = &job;
                scope.spawn(move || job(k, d))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect()
    });
    results.into_iter().collect()
}

/// Index of the first evaluation after which every later value stays within
/// `tolerance` (relative) of the plateau, the mean of the last tenth of
/// the series. Returns `(iteration, plateau)`.
pub fn plateau_reached(series: &[(u64, f64)], tolerance: f64) -> Option<(u64, f64)> {
    if series.is_empty() {
        return None;
    }
    let tail = (series.len() / 10).max(1);
    let plateau = series[series.len() - tail..]
        .iter()
        .map(|p| p.1)
        .sum::<f64>()
        / tail as f64;
    let band = tolerance * plateau.abs();
    let mut first = series.len() - 1;
    for i in (0..series.len()).rev() {
        if (series[i].1 - plateau).abs() > band {
            break;
        }
        first = i;
    }
    Some((series[first].0, plateau))
}
