//! Chain diagnostics.
//!
//! Jump distances measured on a trace use the lag between *recorded* rows;
//! with thinning `n` a lag of `k` rows spans `k * n` single-variable updates.

mod pca;
mod topics;

use serde::{Deserialize, Serialize};

use crate::engine::ChainTrace;
use crate::error::{Error, Result};

pub use pca::{pca_project, PcaProjection};
pub use topics::{
    fold_in, lda_log_likelihood, lda_perplexity, match_topics, perplexity_with_topics,
    total_variation, TopicMatch, FOLD_IN_SWEEPS,
};

/// Mean and sum of squared deviations; errors on constant or too-short input.
fn centred(series: &[f64]) -> Result<(Vec<f64>, f64)> {
    if series.len() < 2 {
        return Err(Error::Degenerate("series needs at least two values".into()));
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let c: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let ss: f64 = c.iter().map(|x| x * x).sum();
    let spread = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if spread <= 1e-12 * mean.abs() || ss == 0.0 {
        return Err(Error::Degenerate("series is constant".into()));
    }
    Ok((c, ss))
}

fn lagged_sum(c: &[f64], k: usize) -> f64 {
    c[..c.len() - k]
        .iter()
        .zip(&c[k..])
        .map(|(a, b)| a * b)
        .sum()
}

/// Biased-normalised lag-`k` autocorrelation.
pub fn autocorrelation(series: &[f64], lag: usize) -> Result<f64> {
    if lag >= series.len() {
        return Err(Error::InvalidArgument(format!(
            "lag {lag} needs more than {} values",
            series.len()
        )));
    }
    let (c, ss) = centred(series)?;
    Ok(lagged_sum(&c, lag) / ss)
}

/// `rho_0 ..= rho_max_lag` (capped at `len - 1`).
pub fn autocorrelations(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let (c, ss) = centred(series)?;
    let top = max_lag.min(series.len() - 1);
    Ok((0..=top).map(|k| lagged_sum(&c, k) / ss).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Truncation {
    /// Geyer's initial positive sequence: sum autocorrelation pairs
    /// `rho_{2m} + rho_{2m+1}` while they stay positive.
    InitialPositive,
    /// Sum `rho_1 ..= rho_K` for a fixed `K`.
    FixedLag(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EssEstimate {
    pub ess: f64,
    pub samples: usize,
    /// Last lag included in the autocorrelation sum.
    pub truncation_lag: usize,
    /// The truncated sum made `1 + 2 sum rho_k` nonpositive; `ess` is then `samples`.
    pub degenerate: bool,
}

/// `N / (1 + 2 sum_{k=1}^{K*} rho_k)`.
pub fn effective_sample_size(series: &[f64], truncation: Truncation) -> Result<EssEstimate> {
    let (c, ss) = centred(series)?;
    let n = series.len();
    let rho = |k: usize| lagged_sum(&c, k) / ss;
    let (tau, last) = match truncation {
        Truncation::FixedLag(k) => {
            let k = k.min(n - 1);
            (1.0 + 2.0 * (1..=k).map(rho).sum::<f64>(), k)
        }
        Truncation::InitialPositive => {
            let mut pairs = 0.0;
            let mut last = 0;
            let mut m = 0;
            while 2 * m + 1 < n {
                let gamma = rho(2 * m) + rho(2 * m + 1);
                if gamma <= 0.0 {
                    break;
                }
                pairs += gamma;
                last = 2 * m + 1;
                m += 1;
            }
            (-1.0 + 2.0 * pairs, last)
        }
    };
    let degenerate = !(tau > 0.0);
    Ok(EssEstimate {
        ess: if degenerate { n as f64 } else { n as f64 / tau },
        samples: n,
        truncation_lag: last,
        degenerate,
    })
}

/// ESS of every column of a row-major sample matrix.
pub fn ess_per_column(
    samples: &[f64],
    width: usize,
    truncation: Truncation,
) -> Result<Vec<EssEstimate>> {
    let rows = samples.len() / width.max(1);
    (0..width)
        .map(|j| {
            let col: Vec<f64> = (0..rows).map(|r| samples[r * width + j]).collect();
            effective_sample_size(&col, truncation)
        })
        .collect()
}

/// Mean of `||x_{t+k} - x_t||^2` over consecutive rows of a row-major matrix.
pub fn esjd_rows(samples: &[f64], width: usize, lag: usize) -> Result<f64> {
    let rows = if width == 0 { 0 } else { samples.len() / width };
    if rows <= lag {
        return Err(Error::InvalidArgument(format!(
            "{rows} recorded states are too few for lag {lag}"
        )));
    }
    let pairs = rows - lag;
    let total: f64 = (0..pairs)
        .map(|t| {
            let a = &samples[t * width..(t + 1) * width];
            let b = &samples[(t + lag) * width..(t + lag + 1) * width];
            a.iter().zip(b).map(|(x, y)| (y - x).powi(2)).sum::<f64>()
        })
        .sum();
    Ok(total / pairs as f64)
}

/// Lag-`k` jump distance over the post-burn-in rows of `trace`.
pub fn esjd_empirical(trace: &ChainTrace, lag: usize) -> Result<f64> {
    esjd_rows(trace.post_burn_in(), trace.width, lag)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchMeans {
    pub mean: f64,
    pub standard_error: f64,
    pub batches: usize,
}

/// Jump distance with a batch-means standard error; the squared jumps are
/// split into `batches` contiguous blocks.
pub fn esjd_batch_means(trace: &ChainTrace, lag: usize, batches: usize) -> Result<BatchMeans> {
    let w = trace.width;
    let samples = trace.post_burn_in();
    let rows = if w == 0 { 0 } else { samples.len() / w };
    if batches < 2 || rows <= lag + batches {
        return Err(Error::InvalidArgument(
            "trace too short for batch means".into(),
        ));
    }
    let jumps: Vec<f64> = (0..rows - lag)
        .map(|t| {
            (0..w)
                .map(|j| (samples[(t + lag) * w + j] - samples[t * w + j]).powi(2))
                .sum()
        })
        .collect();
    let size = jumps.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| jumps[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let mean = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok(BatchMeans {
        mean,
        standard_error: (var / batches as f64).sqrt(),
        batches,
    })
}

/// `||X_true - X_hat||_F / ||X_true||_F`.
pub fn relative_l2_error(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} true values vs {} estimates",
            truth.len(),
            estimate.len()
        )));
    }
    let denom: f64 = truth.iter().map(|x| x * x).sum();
    if denom == 0.0 {
        return Err(Error::Degenerate("reference image is all zeros".into()));
    }
    let num: f64 = truth
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok((num / denom).sqrt())
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(
            "rank correlation of unequal lengths".into(),
        ));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let (ca, sa) = centred(&ra)?;
    let (cb, sb) = centred(&rb)?;
    Ok(ca.iter().zip(&cb).map(|(x, y)| x * y).sum::<f64>() / (sa * sb).sqrt())
}

/// Summary of one chain.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    /// `autocorrelation[j][k]` is `rho_k` of coordinate `j`; empty for
    /// constant coordinates.
    pub autocorrelation: Vec<Vec<f64>>,
    /// Mean over non-constant coordinates, by lag.
    pub mean_autocorrelation: Vec<f64>,
    pub ess: Vec<Option<EssEstimate>>,
    /// Smallest per-coordinate ESS.
    pub min_ess: Option<f64>,
    /// `(lag in recorded rows, estimate)`.
    pub esjd: Vec<(usize, f64)>,
    pub samples: usize,
}

impl DiagnosticsReport {
    pub fn from_trace(trace: &ChainTrace, max_lag: usize, esjd_lags: &[usize]) -> Self {
        let from = trace.burn_in_rows.min(trace.rows());
        let mut report = DiagnosticsReport {
            samples: trace.rows() - from,
            ..Default::default()
        };
        for j in 0..trace.width {
            let col = trace.column(j, from);
            report
                .autocorrelation
                .push(autocorrelations(&col, max_lag).unwrap_or_default());
            report
                .ess
                .push(effective_sample_size(&col, Truncation::InitialPositive).ok());
        }
        let curves: Vec<&Vec<f64>> = report
            .autocorrelation
            .iter()
            .filter(|c| !c.is_empty())
            .collect();
        if let Some(len) = curves.iter().map(|c| c.len()).min() {
            report.mean_autocorrelation = (0..len)
                .map(|k| curves.iter().map(|c| c[k]).sum::<f64>() / curves.len() as f64)
                .collect();
        }
        report.min_ess = report
            .ess
            .iter()
            .flatten()
            .map(|e| e.ess)
            .min_by(f64::total_cmp);
        report.esjd = esjd_lags
            .iter()
            .filter_map(|&k| esjd_empirical(trace, k).ok().map(|v| (k, v)))
            .collect();
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn ar1(n: usize, phi: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = 0.0;
        let scale = (1.0 - phi * phi).sqrt();
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x = phi * x + scale * z;
                x
            })
            .collect()
    }

    #[test]
    fn lag_zero_is_one() {
        assert!((autocorrelation(&[1.0, 3.0, 2.0, 7.0], 0).unwrap() - 1.0).abs() < 1e-15);
        assert!(autocorrelation(&[2.0; 5], 1).is_err());
        assert!(autocorrelation(&[1.0, 2.0], 2).is_err());
    }

    // For +1, -1, ... of even length N the lag-1 sum is -(N - 1) over N, so
    // rho_1 = -(N - 1) / N, exactly 1/N from -1.
    #[test]
    fn alternating_series() {
        for n in [10usize, 100, 1000] {
            let s: Vec<f64> = (0..n)
                .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
                .collect();
            let r = autocorrelation(&s, 1).unwrap();
            assert!((r + 1.0).abs() <= 2.0 / n as f64, "{n}: {r}");
            assert!((r + (n as f64 - 1.0) / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn iid_lag_one_in_bartlett_band() {
        let n = 100_000;
        let r = autocorrelation(&normals(n, 1), 1).unwrap();
        assert!(r.abs() <= 3.0 / (n as f64).sqrt(), "{r}");
    }

    #[test]
    fn iid_ess_close_to_n() {
        let s = normals(10_000, 2);
        let e = effective_sample_size(&s, Truncation::InitialPositive).unwrap();
        assert!(!e.degenerate);
        assert!((e.ess - 1e4).abs() <= 0.2 * 1e4, "{e:?}");
    }

    // For AR(1), rho_k = phi^k so 1 + 2 sum rho_k = (1 + phi) / (1 - phi).
    #[test]
    fn ar1_ess_matches_closed_form() {
        let n = 100_000;
        let phi = 0.5;
        let expected = n as f64 * (1.0 - phi) / (1.0 + phi);
        let e = effective_sample_size(&ar1(n, phi, 3), Truncation::InitialPositive).unwrap();
        assert!(
            (e.ess - expected).abs() <= 0.1 * expected,
            "{e:?} vs {expected}"
        );
        let fixed = effective_sample_size(&ar1(n, phi, 3), Truncation::FixedLag(30)).unwrap();
        assert!((fixed.ess - expected).abs() <= 0.1 * expected);
    }

    #[test]
    fn constant_series_is_degenerate() {
        assert!(matches!(
            effective_sample_size(&[4.2; 100], Truncation::InitialPositive),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn alternating_series_flags_degenerate_ess() {
        let s: Vec<f64> = (0..100)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let e = effective_sample_size(&s, Truncation::FixedLag(1)).unwrap();
        assert!(e.degenerate);
        assert_eq!(e.ess, 100.0);
    }

    #[test]
    fn esjd_rows_simple_cases() {
        let constant = vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0];
        assert_eq!(esjd_rows(&constant, 2, 1).unwrap(), 0.0);
        let moving = vec![0.0, 0.0, 1.0, 1.0, 3.0, 1.0];
        assert_eq!(esjd_rows(&moving, 2, 0).unwrap(), 0.0);
        // Jumps (1,1) and (2,0): squared norms 2 and 4.
        assert_eq!(esjd_rows(&moving, 2, 1).unwrap(), 3.0);
        assert!(esjd_rows(&moving, 2, 3).is_err());
    }

    #[test]
    fn relative_error_examples() {
        let x = vec![1.0, -1.0, -1.0, 1.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(relative_l2_error(&x, &x).unwrap(), 0.0);
        assert_eq!(relative_l2_error(&x, &neg).unwrap(), 2.0);
        assert_eq!(relative_l2_error(&x, &[0.0; 4]).unwrap(), 1.0);
        assert!(relative_l2_error(&x, &[0.0; 3]).is_err());
        assert!(relative_l2_error(&[0.0; 2], &[1.0; 2]).is_err());
    }

    #[test]
    fn relative_error_sign_symmetry() {
        let x = vec![1.0, -1.0, 1.0, 1.0, -1.0];
        let h = vec![0.3, -0.9, 0.1, 1.0, 0.2];
        let flip = |v: &[f64]| v.iter().map(|a| -a).collect::<Vec<_>>();
        let a = relative_l2_error(&x, &h).unwrap();
        let b = relative_l2_error(&flip(&x), &flip(&h)).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn spearman_handles_ties() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        let r = spearman(&[0.0, 0.0, 1.0, 1.0], &[0.0, 0.0, 5.0, 5.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert_eq!(average_ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
    }
}
