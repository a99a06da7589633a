use rand::Rng;

use crate::error::{Error, Result};
use crate::models::lda::{Corpus, LdaModel, LdaState};

pub const FOLD_IN_SWEEPS: usize = 20;

/// Training log-likelihood `sum_tokens log sum_k theta_mk phi_kw` under the
/// point estimates of the current state.
pub fn lda_log_likelihood(model: &LdaModel, state: &LdaState) -> f64 {
    let (k, v) = (model.topics(), model.vocab_size());
    let phi = model.phi_hat(state);
    let theta = model.theta_hat(state);
    model
        .corpus()
        .documents
        .iter()
        .enumerate()
        .map(|(m, doc)| {
            let th = &theta[m * k..(m + 1) * k];
            doc.iter()
                .map(|&w| {
                    (0..k)
                        .map(|t| th[t] * phi[t * v + w as usize])
                        .sum::<f64>()
                        .ln()
                })
                .sum::<f64>()
        })
        .sum()
}

/// Estimate a held-out document's topic proportions by Gibbs sampling its
/// assignments with the topics held fixed.
pub fn fold_in<R: Rng + ?Sized>(
    phi: &[f64],
    topics: usize,
    alpha: f64,
    document: &[u32],
    sweeps: usize,
    rng: &mut R,
) -> Vec<f64> {
    let v = phi.len() / topics;
    let mut counts = vec![0u32; topics];
    let mut z: Vec<usize> = document
        .iter()
        .map(|_| {
            let t = rng.gen_range(0..topics);
            counts[t] += 1;
            t
        })
        .collect();
    let mut weights = vec![0.0; topics];
    for _ in 0..sweeps {
        for (pos, &w) in document.iter().enumerate() {
            counts[z[pos]] -= 1;
            for t in 0..topics {
                weights[t] = phi[t * v + w as usize] * (counts[t] as f64 + alpha);
            }
            let mut u = rng.gen::<f64>() * weights.iter().sum::<f64>();
            let mut pick = topics - 1;
            for (t, wt) in weights.iter().enumerate() {
                if u < *wt {
                    pick = t;
                    break;
                }
                u -= wt;
            }
            z[pos] = pick;
            counts[pick] += 1;
        }
    }
    let denom = document.len() as f64 + topics as f64 * alpha;
    counts.iter().map(|&c| (c as f64 + alpha) / denom).collect()
}

/// `exp(-log p(heldout) / tokens)` for fixed topics `phi` (`K x V` row-major).
pub fn perplexity_with_topics<R: Rng + ?Sized>(
    phi: &[f64],
    topics: usize,
    alpha: f64,
    heldout: &Corpus,
    sweeps: usize,
    rng: &mut R,
) -> Result<f64> {
    let tokens = heldout.token_count();
    if tokens == 0 {
        return Err(Error::InvalidArgument(
            "held-out corpus has no tokens".into(),
        ));
    }
    if topics == 0 || phi.len() % topics != 0 || phi.len() / topics != heldout.vocab_size {
        return Err(Error::ShapeMismatch(format!(
            "{} topic-word entries do not fit {topics} topics over {} words",
            phi.len(),
            heldout.vocab_size
        )));
    }
    let v = heldout.vocab_size;
    let mut log_lik = 0.0;
    for doc in &heldout.documents {
        if doc.is_empty() {
            continue;
        }
        let theta = fold_in(phi, topics, alpha, doc, sweeps, rng);
        for &w in doc {
            log_lik += (0..topics)
                .map(|t| theta[t] * phi[t * v + w as usize])
                .sum::<f64>()
                .ln();
        }
    }
    Ok((-log_lik / tokens as f64).exp())
}

/// Held-out perplexity of a trained model, folding in each held-out
/// document for `sweeps` sweeps.
pub fn lda_perplexity<R: Rng + ?Sized>(
    model: &LdaModel,
    state: &LdaState,
    heldout: &Corpus,
    sweeps: usize,
    rng: &mut R,
) -> Result<f64> {
    if heldout.vocab_size != model.vocab_size() {
        return Err(Error::ShapeMismatch(
            "held-out vocabulary differs from training".into(),
        ));
    }
    perplexity_with_topics(
        &model.phi_hat(state),
        model.topics(),
        model.alpha,
        heldout,
        sweeps,
        rng,
    )
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TopicMatch {
    pub truth: usize,
    pub learned: usize,
    pub distance: f64,
}

/// Greedy one-to-one matching of true topics to learned ones by
/// total-variation distance, closest pairs first. Returned in true-topic order.
pub fn match_topics(truth: &[Vec<f64>], learned: &[Vec<f64>]) -> Vec<TopicMatch> {
    let mut pairs: Vec<TopicMatch> = truth
        .iter()
        .enumerate()
        .flat_map(|(i, t)| {
            learned.iter().enumerate().map(move |(j, l)| TopicMatch {
                truth: i,
                learned: j,
                distance: total_variation(t, l),
            })
        })
        .collect();
    pairs.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    let mut used_t = vec![false; truth.len()];
    let mut used_l = vec![false; learned.len()];
    let mut out = Vec::new();
    for p in pairs {
        if !used_t[p.truth] && !used_l[p.learned] {
            used_t[p.truth] = true;
            used_l[p.learned] = true;
            out.push(p);
        }
    }
    out.sort_by_key(|m| m.truth);
    out
}
