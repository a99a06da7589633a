//! Generic single-site Gibbs chain runner.
//!
//! A chain is driven by two random streams derived from one seed: stream 0
//! feeds the model's conditional draws and stream 1 feeds the scheduler.
//! Swapping schedulers therefore never shifts the model-noise stream, which
//! keeps comparisons between scan orders paired.
//!
//! All counters here are in single-variable updates ("steps"). Reports that
//! speak of iterations use sweeps of `d` steps; see [`ChainConfig::from_sweeps`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedulers::Scheduler;

const MODEL_STREAM: u64 = 0;
const SCHEDULER_STREAM: u64 = 1;

/// Anything with a fixed number of schedulable coordinates.
pub trait StateVector {
    fn dimension(&self) -> usize;
}

impl<T> StateVector for Vec<T> {
    fn dimension(&self) -> usize {
        self.len()
    }
}

/// How the per-variable summaries fed to the scheduler turn into `d_i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SummaryKind {
    /// The summary is the variable's current value; `d_i` is twice its
    /// variance across updates.
    #[default]
    Level,
    /// The summary is already a squared displacement between consecutive
    /// visits; `d_i` is its running mean.
    SquaredJump,
}

/// A target distribution that can be sampled one variable (or block) at a time.
pub trait GibbsModel {
    type State: StateVector + Clone;

    /// Number of schedulable variables.
    fn dimension(&self) -> usize;

    /// Replace variable `index` of `state` with a draw from its full
    /// conditional given every other variable. Nothing else may change.
    fn update<R: Rng + ?Sized>(&self, state: &mut Self::State, index: usize, rng: &mut R);

    /// Deterministic scalar describing variable `index`, fed to adaptive schedulers.
    fn scalar_summary(&self, state: &Self::State, index: usize) -> f64;

    fn summary_kind(&self) -> SummaryKind {
        SummaryKind::Level
    }

    /// Width of one recorded trace row. Zero disables state recording.
    fn record_width(&self) -> usize {
        self.dimension()
    }

    /// Append one trace row describing `state` to `out`.
    fn record(&self, state: &Self::State, out: &mut Vec<f64>);

    fn unnormalized_log_density(&self, _state: &Self::State) -> Option<f64> {
        None
    }
}

/// Chain length and bookkeeping, all in single-variable updates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub total_steps: u64,
    /// Steps discarded by downstream estimates; must be below `total_steps`.
    pub burn_in: u64,
    /// Record the state after every `thinning`-th step.
    pub thinning: u64,
    pub seed: u64,
    /// Sequential passes over all variables before the scheduler takes over.
    pub initial_sweeps: u64,
}

impl ChainConfig {
    pub const DEFAULT_INITIAL_SWEEPS: u64 = 2;

    pub fn new(total_steps: u64, seed: u64) -> Self {
        Self {
            total_steps,
            burn_in: 0,
            thinning: 1,
            seed,
            initial_sweeps: Self::DEFAULT_INITIAL_SWEEPS,
        }
    }

    /// Express lengths in sweeps of `dimension` updates each.
    pub fn from_sweeps(
        dimension: usize,
        sweeps: u64,
        burn_in_sweeps: u64,
        thinning_sweeps: u64,
        seed: u64,
    ) -> Self {
        let d = dimension as u64;
        Self {
            total_steps: sweeps * d,
            burn_in: burn_in_sweeps * d,
            thinning: thinning_sweeps * d,
            seed,
            initial_sweeps: Self::DEFAULT_INITIAL_SWEEPS,
        }
    }

    pub fn with_burn_in(mut self, burn_in: u64) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_thinning(mut self, thinning: u64) -> Self {
        self.thinning = thinning;
        self
    }

    pub fn with_initial_sweeps(mut self, sweeps: u64) -> Self {
        self.initial_sweeps = sweeps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 {
            return Err(Error::InvalidConfig("total_steps must be positive".into()));
        }
        if self.burn_in >= self.total_steps {
            return Err(Error::InvalidConfig(format!(
                "burn_in ({}) must be below total_steps ({})",
                self.burn_in, self.total_steps
            )));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidConfig("thinning must be positive".into()));
        }
        Ok(())
    }

    /// Number of rows a trace of this configuration holds.
    pub fn recorded_rows(&self) -> usize {
        (self.total_steps / self.thinning) as usize
    }

    /// Recorded rows that fall inside the burn-in window.
    pub fn burn_in_rows(&self) -> usize {
        (self.burn_in / self.thinning) as usize
    }
}

/// Everything a chain run produced.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    /// Row-major `rows x width` recorded states.
    pub samples: Vec<f64>,
    pub width: usize,
    /// Step number (1-based) at which each row was recorded.
    pub recorded_steps: Vec<u64>,
    /// Variable updated at every step, zero-based.
    pub selected_indices: Vec<u32>,
    /// `(step, q)` whenever the scheduler published new weights. The step is
    /// the number of updates completed before the weights took effect.
    pub weight_snapshots: Vec<(u64, Vec<f64>)>,
    pub seed: u64,
    pub burn_in_rows: usize,
}

impl ChainTrace {
    pub fn rows(&self) -> usize {
        self.recorded_steps.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.samples[r * self.width..(r + 1) * self.width]
    }

    /// Column `j` over rows `from..`.
    pub fn column(&self, j: usize, from: usize) -> Vec<f64> {
        (from..self.rows())
            .map(|r| self.samples[r * self.width + j])
            .collect()
    }

    /// Rows after burn-in, still row-major.
    pub fn post_burn_in(&self) -> &[f64] {
        &self.samples[self.burn_in_rows * self.width..]
    }

    /// Fraction of steps that selected each variable.
    pub fn selection_frequencies(&self, dimension: usize) -> Vec<f64> {
        let mut counts = vec![0u64; dimension];
        for &i in &self.selected_indices {
            counts[i as usize] += 1;
        }
        let n = self.selected_indices.len().max(1) as f64;
        counts.into_iter().map(|c| c as f64 / n).collect()
    }
}

/// Independent model and scheduler streams for `seed`.
pub fn chain_rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut model = ChaCha8Rng::seed_from_u64(seed);
    model.set_stream(MODEL_STREAM);
    let mut scheduler = ChaCha8Rng::seed_from_u64(seed);
    scheduler.set_stream(SCHEDULER_STREAM);
    (model, scheduler)
}

/// A further stream for auxiliary randomness (initialisation, fold-in) that
/// must not disturb the chain's own streams.
pub fn auxiliary_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream + 2);
    rng
}

/// One Gibbs update of variable `index`.
pub fn step<M: GibbsModel, R: Rng + ?Sized>(
    model: &M,
    state: &mut M::State,
    index: usize,
    rng: &mut R,
) -> Result<()> {
    let d = model.dimension();
    if index >= d {
        return Err(Error::IndexOutOfRange {
            index,
            dimension: d,
        });
    }
    model.update(state, index, rng);
    Ok(())
}

pub fn run_chain<M, S>(
    model: &M,
    scheduler: &mut S,
    config: &ChainConfig,
    initial_state: M::State,
) -> Result<ChainTrace>
where
    M: GibbsModel,
    S: Scheduler + ?Sized,
{
    run_chain_observed(model, scheduler, config, initial_state, |_, _| {})
}

/// As [`run_chain`], also handing every recorded state to `observer`
/// together with its step number.
pub fn run_chain_observed<M, S, F>(
    model: &M,
    scheduler: &mut S,
    config: &ChainConfig,
    initial_state: M::State,
    mut observer: F,
) -> Result<ChainTrace>
where
    M: GibbsModel,
    S: Scheduler + ?Sized,
    F: FnMut(u64, &M::State),
{
    config.validate()?;
    let d = model.dimension();
    if initial_state.dimension() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: initial_state.dimension(),
        });
    }
    scheduler.attach(d, model.summary_kind())?;

    let (mut model_rng, mut scheduler_rng) = chain_rngs(config.seed);
    let width = model.record_width();
    let rows = config.recorded_rows();
    let mut trace = ChainTrace {
        samples: Vec::with_capacity(rows * width),
        width,
        recorded_steps: Vec::with_capacity(rows),
        selected_indices: Vec::with_capacity(config.total_steps as usize),
        weight_snapshots: Vec::new(),
        seed: config.seed,
        burn_in_rows: config.burn_in_rows(),
    };

    let mut state = initial_state;
    let sequential_steps = config.initial_sweeps.saturating_mul(d as u64);
    let mut seen_revision = scheduler.revision();

    for t in 1..=config.total_steps {
        let index = if t <= sequential_steps {
            ((t - 1) % d as u64) as usize
        } else {
            let i = scheduler.next_index(&mut scheduler_rng);
            if scheduler.revision() != seen_revision {
                seen_revision = scheduler.revision();
                if let Some(q) = scheduler.weights() {
                    trace
                        .weight_snapshots
                        .push((t - 1, q.probabilities().to_vec()));
                }
            }
            i
        };
        debug_assert!(index < d);
        model.update(&mut state, index, &mut model_rng);
        scheduler.observe(index, model.scalar_summary(&state, index));
        trace.selected_indices.push(index as u32);

        if t == config.burn_in {
            scheduler.end_burn_in();
        }
        if t % config.thinning == 0 {
            if width > 0 {
                model.record(&state, &mut trace.samples);
            }
            trace.recorded_steps.push(t);
            observer(t, &state);
        }
    }
    Ok(trace)
}
