use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{compute_weights, Scheduler, SelectionWeights, VarianceAccumulator};
use crate::engine::SummaryKind;
use crate::error::{Error, Result};

/// Regularisation added to every `sqrt(d_hat_i)` before normalising.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lambda {
    Fixed(f64),
    /// `factor * mean_i sqrt(d_hat_i)`, recomputed at each refresh and
    /// floored at [`Lambda::FLOOR`].
    Relative(f64),
}

impl Lambda {
    pub const FLOOR: f64 = 1e-8;
    pub const DEFAULT_RELATIVE: f64 = 0.01;

    pub fn resolve(&self, d_hat: &[f64]) -> f64 {
        match *self {
            Lambda::Fixed(v) => v,
            Lambda::Relative(factor) => {
                let mean_root =
                    d_hat.iter().map(|v| v.sqrt()).sum::<f64>() / d_hat.len().max(1) as f64;
                (factor * mean_root).max(Self::FLOOR)
            }
        }
    }
}

impl Default for Lambda {
    fn default() -> Self {
        Lambda::Relative(Self::DEFAULT_RELATIVE)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSchedulerConfig {
    /// Steps between weight refreshes; `None` means one refresh per `d` steps.
    pub update_period: Option<u64>,
    pub lambda: Lambda,
    /// Keep refreshing after burn-in. When false the weights freeze at the
    /// end of burn-in.
    pub adapt_after_burn_in: bool,
    /// Exponential forgetting for the variance estimates; off when `None`.
    pub forgetting: Option<f64>,
}

impl Default for WeightedSchedulerConfig {
    fn default() -> Self {
        Self {
            update_period: None,
            lambda: Lambda::default(),
            adapt_after_burn_in: true,
            forgetting: None,
        }
    }
}

/// Random scan whose selection probabilities follow `sqrt(d_hat_i) + lambda`.
///
/// Weights start uniform. They are recomputed from the accumulator on the
/// first scheduled step and every `update_period` scheduled steps after that.
#[derive(Clone, Debug)]
pub struct WeightedScheduler {
    config: WeightedSchedulerConfig,
    period: u64,
    accumulator: VarianceAccumulator,
    q: SelectionWeights,
    steps: u64,
    frozen: bool,
    revision: u64,
}

impl WeightedScheduler {
    pub fn new(d: usize, config: WeightedSchedulerConfig) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if config.update_period == Some(0) {
            return Err(Error::InvalidConfig("update_period must be >= 1".into()));
        }
        let (Lambda::Fixed(v) | Lambda::Relative(v)) = config.lambda;
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be >= 0, got {v}"
            )));
        }
        if let Some(f) = config.forgetting {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "forgetting factor must be in (0, 1), got {f}"
                )));
            }
        }
        let mut accumulator = VarianceAccumulator::new(d);
        if let Some(f) = config.forgetting {
            accumulator = accumulator.with_forgetting(f);
        }
        Ok(Self {
            period: config.update_period.unwrap_or(d as u64),
            config,
            accumulator,
            q: SelectionWeights::uniform(d),
            steps: 0,
            frozen: false,
            revision: 0,
        })
    }

    pub fn accumulator(&self) -> &VarianceAccumulator {
        &self.accumulator
    }

    pub fn update_period(&self) -> u64 {
        self.period
    }

    /// Recompute `q` from the current variance estimates.
    pub fn refresh(&mut self) {
        let d_hat = self.accumulator.d_hat_all();
        let lambda = self.config.lambda.resolve(&d_hat);
        // A fixed lambda of zero with an unvisited variable cannot produce a
        // valid weight vector; keep the previous weights in that case.
        if let Ok(q) = compute_weights(&d_hat, lambda) {
            self.q = q;
            self.revision += 1;
        }
    }
}

impl Scheduler for WeightedScheduler {
    fn name(&self) -> &'static str {
        "weighted"
    }

    fn dimension(&self) -> usize {
        self.q.len()
    }

    fn attach(&mut self, dimension: usize, kind: SummaryKind) -> Result<()> {
        if dimension != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: dimension,
            });
        }
        if kind != self.accumulator.kind() {
            self.accumulator.reset(dimension, kind);
        }
        Ok(())
    }

    fn next_index(&mut self, rng: &mut dyn RngCore) -> usize {
        if !self.frozen && self.steps % self.period == 0 {
            self.refresh();
        }
        self.steps += 1;
        self.q.sample(rng)
    }

    fn observe(&mut self, index: usize, summary: f64) {
        if !self.frozen {
            self.accumulator.feed(index, summary);
        }
    }

    fn end_burn_in(&mut self) {
        if !self.config.adapt_after_burn_in {
            self.frozen = true;
        }
    }

    fn weights(&self) -> Option<&SelectionWeights> {
        Some(&self.q)
    }

    fn revision(&self) -> u64 {
        self.revision
    }
}
