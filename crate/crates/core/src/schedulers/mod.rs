//! Scan orders: which variable a Gibbs chain updates next.

mod accumulator;
mod weighted;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::engine::SummaryKind;
use crate::error::{Error, Result};

pub use accumulator::VarianceAccumulator;
pub use weighted::{Lambda, WeightedScheduler, WeightedSchedulerConfig};

const SUM_TOLERANCE: f64 = 1e-12;

/// Chooses the next variable to update.
///
/// A scheduler is owned by exactly one chain. The chain calls [`attach`]
/// once, then alternates [`next_index`] and [`observe`].
///
/// [`attach`]: Scheduler::attach
/// [`next_index`]: Scheduler::next_index
/// [`observe`]: Scheduler::observe
pub trait Scheduler: Send {
    fn name(&self) -> &'static str;

    fn dimension(&self) -> usize;

    /// Called before the first step; rejects a model of the wrong dimension.
    fn attach(&mut self, dimension: usize, _kind: SummaryKind) -> Result<()> {
        if dimension != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: dimension,
            });
        }
        Ok(())
    }

    fn next_index(&mut self, rng: &mut dyn RngCore) -> usize;

    /// The summary of variable `index` right after it was updated.
    fn observe(&mut self, _index: usize, _summary: f64) {}

    fn end_burn_in(&mut self) {}

    fn weights(&self) -> Option<&SelectionWeights> {
        None
    }

    /// Incremented whenever [`Scheduler::weights`] changes.
    fn revision(&self) -> u64 {
        0
    }
}

impl<S: Scheduler + ?Sized> Scheduler for Box<S> {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn attach(&mut self, dimension: usize, kind: SummaryKind) -> Result<()> {
        (**self).attach(dimension, kind)
    }
    fn next_index(&mut self, rng: &mut dyn RngCore) -> usize {
        (**self).next_index(rng)
    }
    fn observe(&mut self, index: usize, summary: f64) {
        (**self).observe(index, summary)
    }
    fn end_burn_in(&mut self) {
        (**self).end_burn_in()
    }
    fn weights(&self) -> Option<&SelectionWeights> {
        (**self).weights()
    }
    fn revision(&self) -> u64 {
        (**self).revision()
    }
}

/// A strictly positive probability vector over variables, with its
/// cumulative table for O(log d) draws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SelectionWeights {
    q: Vec<f64>,
    cumulative: Vec<f64>,
}

impl SelectionWeights {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::InvalidWeights("empty weight vector".into()));
        }
        if let Some(bad) = q.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::InvalidWeights(format!(
                "every weight must be positive and finite, found {bad}"
            )));
        }
        let sum: f64 = q.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidWeights(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(Self::from_valid(q))
    }

    pub fn uniform(d: usize) -> Self {
        assert!(d > 0, "uniform weights need at least one variable");
        Self::from_valid(vec![1.0 / d as f64; d])
    }

    fn from_valid(q: Vec<f64>) -> Self {
        let mut acc = 0.0;
        let cumulative = q
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self { q, cumulative }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Draw an index with probability `q_i`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().unwrap();
        let u = rng.gen::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.q.len() - 1)
    }
}

impl TryFrom<Vec<f64>> for SelectionWeights {
    type Error = Error;
    fn try_from(q: Vec<f64>) -> Result<Self> {
        Self::new(q)
    }
}

impl From<SelectionWeights> for Vec<f64> {
    fn from(w: SelectionWeights) -> Self {
        w.q
    }
}

/// `((t - 1) mod d) + 1` for a 1-based step counter `t`, returned zero-based.
pub fn systematic_next(t: u64, d: usize) -> usize {
    assert!(t >= 1 && d >= 1);
    ((t - 1) % d as u64) as usize
}

pub fn categorical_next<R: Rng + ?Sized>(rng: &mut R, q: &SelectionWeights) -> usize {
    q.sample(rng)
}

/// `q_i = (sqrt(d_i) + lambda) / sum_j (sqrt(d_j) + lambda)`.
///
/// Negative or non-finite `d_hat` entries are rejected; an entry of zero is
/// fine as long as `lambda` is positive or some other entry is positive.
pub fn compute_weights(d_hat: &[f64], lambda: f64) -> Result<SelectionWeights> {
    if d_hat.is_empty() {
        return Err(Error::InvalidArgument("no variables".into()));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    if let Some(bad) = d_hat.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "d_hat entries must be >= 0, got {bad}"
        )));
    }
    let raw: Vec<f64> = d_hat.iter().map(|v| v.sqrt() + lambda).collect();
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidWeights(
            "all d_hat are zero and lambda is zero".into(),
        ));
    }
    if raw.iter().any(|r| *r == 0.0) {
        return Err(Error::InvalidWeights(
            "zero d_hat entry with lambda = 0 gives a zero selection probability".into(),
        ));
    }
    let mut q: Vec<f64> = raw.iter().map(|r| r / total).collect();
    // Fold the rounding residue into the largest entry so the sum is 1 to the last ulp.
    let residue = 1.0 - q.iter().sum::<f64>();
    let largest = (0..q.len()).max_by(|&a, &b| q[a].total_cmp(&q[b])).unwrap();
    q[largest] += residue;
    Ok(SelectionWeights::from_valid(q))
}

/// Deterministic sweep `0, 1, ..., d-1, 0, 1, ...`.
#[derive(Clone, Debug)]
pub struct SystematicScheduler {
    d: usize,
    t: u64,
}

impl SystematicScheduler {
    pub fn new(d: usize) -> Self {
        Self { d, t: 0 }
    }
}

impl Scheduler for SystematicScheduler {
    fn name(&self) -> &'static str {
        "systematic"
    }
    fn dimension(&self) -> usize {
        self.d
    }
    fn next_index(&mut self, _rng: &mut dyn RngCore) -> usize {
        self.t += 1;
        systematic_next(self.t, self.d)
    }
}

/// Random scan with fixed weights; uniform by default.
#[derive(Clone, Debug)]
pub struct UniformScheduler {
    q: SelectionWeights,
}

impl UniformScheduler {
    pub fn new(d: usize) -> Self {
        Self {
            q: SelectionWeights::uniform(d),
        }
    }

    /// A random scan that never adapts its weights.
    pub fn with_weights(q: SelectionWeights) -> Self {
        Self { q }
    }
}

impl Scheduler for UniformScheduler {
    fn name(&self) -> &'static str {
        "random"
    }
    fn dimension(&self) -> usize {
        self.q.len()
    }
    fn next_index(&mut self, rng: &mut dyn RngCore) -> usize {
        self.q.sample(rng)
    }
    fn weights(&self) -> Option<&SelectionWeights> {
        Some(&self.q)
    }
}
