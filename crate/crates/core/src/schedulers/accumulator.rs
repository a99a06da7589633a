use serde::{Deserialize, Serialize};

use crate::engine::SummaryKind;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
struct Moments {
    n: u64,
    mean: f64,
    /// Sum of squared deviations (full history) or the weighted variance
    /// itself (forgetting mode).
    spread: f64,
}

/// Per-variable running moments feeding `d_hat_i`.
///
/// With [`SummaryKind::Level`] the fed values are variable states and
/// `d_hat_i = 2 * s_i / n_i` (twice the population variance, Welford's
/// one-pass update). With [`SummaryKind::SquaredJump`] the fed values are
/// already squared displacements and `d_hat_i` is their mean.
///
/// An optional forgetting factor `f` in `(0, 1)` switches to exponentially
/// weighted moments where each new value carries weight `1 - f`. It is off
/// by default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceAccumulator {
    stats: Vec<Moments>,
    kind: SummaryKind,
    forgetting: Option<f64>,
}

impl VarianceAccumulator {
    pub fn new(d: usize) -> Self {
        Self::with_kind(d, SummaryKind::Level)
    }

    pub fn with_kind(d: usize, kind: SummaryKind) -> Self {
        Self {
            stats: vec![Moments::default(); d],
            kind,
            forgetting: None,
        }
    }

    /// # Panics
    /// If `factor` is outside `(0, 1)`.
    pub fn with_forgetting(mut self, factor: f64) -> Self {
        assert!(
            factor > 0.0 && factor < 1.0,
            "forgetting factor must be in (0, 1)"
        );
        self.forgetting = Some(factor);
        self
    }

    pub fn kind(&self) -> SummaryKind {
        self.kind
    }

    /// Drop all data and switch summary interpretation.
    pub fn reset(&mut self, d: usize, kind: SummaryKind) {
        self.stats = vec![Moments::default(); d];
        self.kind = kind;
    }

    pub fn dimension(&self) -> usize {
        self.stats.len()
    }

    pub fn count(&self, index: usize) -> u64 {
        self.stats[index].n
    }

    pub fn mean(&self, index: usize) -> f64 {
        self.stats[index].mean
    }

    pub fn feed(&mut self, index: usize, value: f64) {
        let m = &mut self.stats[index];
        m.n += 1;
        let delta = value - m.mean;
        match self.forgetting {
            Some(f) if m.n > 1 => {
                let alpha = 1.0 - f;
                let incr = alpha * delta;
                m.mean += incr;
                m.spread = (1.0 - alpha) * (m.spread + delta * incr);
            }
            Some(_) => {
                m.mean = value;
                m.spread = 0.0;
            }
            None => {
                m.mean += delta / m.n as f64;
                m.spread += delta * (value - m.mean);
            }
        }
    }

    /// Population variance of the values fed to `index`, if at least two were fed.
    pub fn variance(&self, index: usize) -> Option<f64> {
        let m = &self.stats[index];
        if m.n < 2 {
            return None;
        }
        Some(
            match self.forgetting {
                Some(_) => m.spread,
                None => m.spread / m.n as f64,
            }
            .max(0.0),
        )
    }

    /// `d_hat_i`, or `None` while there is not enough data.
    pub fn d_hat(&self, index: usize) -> Option<f64> {
        match self.kind {
            SummaryKind::Level => self.variance(index).map(|v| 2.0 * v),
            SummaryKind::SquaredJump => {
                let m = &self.stats[index];
                (m.n >= 1).then_some(m.mean.max(0.0))
            }
        }
    }

    /// All `d_hat_i`, with undefined entries reported as zero.
    pub fn d_hat_all(&self) -> Vec<f64> {
        (0..self.stats.len())
            .map(|i| self.d_hat(i).unwrap_or(0.0))
            .collect()
    }
}
