//! Collapsed Gibbs sampling for latent Dirichlet allocation.
//!
//! The schedulable unit is a whole document: selecting document `m`
//! resamples every token in it once, in order. The summary fed to adaptive
//! schedulers is the squared change of the document's normalised topic
//! counts across that block update.

use rand::Rng;
use rand_distr::{Dirichlet, Distribution};

use crate::engine::{GibbsModel, StateVector, SummaryKind};
use crate::error::{Error, Result};

/// Documents as sequences of word ids in `0..vocab_size`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Vec<u32>>,
    pub vocab_size: usize,
}

impl Corpus {
    pub fn new(documents: Vec<Vec<u32>>, vocab_size: usize) -> Result<Self> {
        if let Some(w) = documents
            .iter()
            .flatten()
            .find(|&&w| w as usize >= vocab_size)
        {
            return Err(Error::InvalidArgument(format!(
                "word id {w} outside vocabulary of {vocab_size}"
            )));
        }
        Ok(Self {
            documents,
            vocab_size,
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.documents.iter().map(Vec::len).sum()
    }
}

#[derive(Clone, Debug)]
pub struct LdaModel {
    corpus: Corpus,
    topics: usize,
    pub alpha: f64,
    pub beta: f64,
}

/// Topic assignments and the count tables kept consistent with them.
#[derive(Clone, Debug, PartialEq)]
pub struct LdaState {
    pub assignments: Vec<Vec<u16>>,
    /// `M x K`, row-major.
    pub doc_topic: Vec<u32>,
    /// `K x V`, row-major.
    pub topic_word: Vec<u32>,
    pub topic_total: Vec<u32>,
    /// Squared topic-proportion change at each document's latest visit.
    pub last_jump: Vec<f64>,
}

impl StateVector for LdaState {
    fn dimension(&self) -> usize {
        self.assignments.len()
    }
}

impl LdaModel {
    pub fn new(corpus: Corpus, topics: usize, alpha: f64, beta: f64) -> Result<Self> {
        if corpus.is_empty() || corpus.token_count() == 0 {
            return Err(Error::InvalidArgument("empty corpus".into()));
        }
        if topics == 0 || topics > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!(
                "unsupported topic count {topics}"
            )));
        }
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::InvalidArgument(
                "alpha and beta must be positive".into(),
            ));
        }
        Ok(Self {
            corpus,
            topics,
            alpha,
            beta,
        })
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn topics(&self) -> usize {
        self.topics
    }

    pub fn vocab_size(&self) -> usize {
        self.corpus.vocab_size
    }

    /// State with the given assignments; counts are derived from them.
    pub fn state_from_assignments(&self, assignments: Vec<Vec<u16>>) -> Result<LdaState> {
        let (k, v) = (self.topics, self.vocab_size());
        if assignments.len() != self.corpus.len() {
            return Err(Error::DimensionMismatch {
                expected: self.corpus.len(),
                actual: assignments.len(),
            });
        }
        let mut state = LdaState {
            doc_topic: vec![0; self.corpus.len() * k],
            topic_word: vec![0; k * v],
            topic_total: vec![0; k],
            last_jump: vec![0.0; self.corpus.len()],
            assignments: Vec::new(),
        };
        for (m, (doc, z)) in self.corpus.documents.iter().zip(&assignments).enumerate() {
            if doc.len() != z.len() {
                return Err(Error::ShapeMismatch(format!(
                    "document {m} has {} tokens but {} assignments",
                    doc.len(),
                    z.len()
                )));
            }
            for (&w, &t) in doc.iter().zip(z) {
                let t = t as usize;
                if t >= k {
                    return Err(Error::InvalidArgument(format!("topic {t} out of range")));
                }
                state.doc_topic[m * k + t] += 1;
                state.topic_word[t * v + w as usize] += 1;
                state.topic_total[t] += 1;
            }
        }
        state.assignments = assignments;
        Ok(state)
    }

    /// Uniformly random initial assignments.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> LdaState {
        let assignments = self
            .corpus
            .documents
            .iter()
            .map(|doc| {
                doc.iter()
                    .map(|_| rng.gen_range(0..self.topics) as u16)
                    .collect()
            })
            .collect();
        self.state_from_assignments(assignments)
            .expect("random assignments are in range")
    }

    /// Full recount; errors if the incremental tables have drifted.
    pub fn check_consistency(&self, state: &LdaState) -> Result<()> {
        let fresh = self.state_from_assignments(state.assignments.clone())?;
        if fresh.doc_topic != state.doc_topic
            || fresh.topic_word != state.topic_word
            || fresh.topic_total != state.topic_total
        {
            return Err(Error::Degenerate(
                "count tables disagree with assignments".into(),
            ));
        }
        Ok(())
    }

    fn remove(&self, state: &mut LdaState, m: usize, word: usize, topic: usize) {
        let (k, v) = (self.topics, self.vocab_size());
        let slots = [
            &mut state.doc_topic[m * k + topic],
            &mut state.topic_word[topic * v + word],
            &mut state.topic_total[topic],
        ];
        for c in slots {
            assert!(
                *c > 0,
                "count table underflow: tables inconsistent with assignments"
            );
            *c -= 1;
        }
    }

    fn add(&self, state: &mut LdaState, m: usize, word: usize, topic: usize) {
        let (k, v) = (self.topics, self.vocab_size());
        state.doc_topic[m * k + topic] += 1;
        state.topic_word[topic * v + word] += 1;
        state.topic_total[topic] += 1;
    }

    /// Unnormalised `(n_kv + beta) / (n_k + V beta) * (n_mk + alpha)` with the
    /// token at `pos` already removed from the counts.
    fn fill_weights(&self, state: &LdaState, m: usize, word: usize, out: &mut [f64]) {
        let (k, v) = (self.topics, self.vocab_size());
        let vb = v as f64 * self.beta;
        for (t, slot) in out.iter_mut().enumerate().take(k) {
            *slot = (state.topic_word[t * v + word] as f64 + self.beta)
                / (state.topic_total[t] as f64 + vb)
                * (state.doc_topic[m * k + t] as f64 + self.alpha);
        }
    }

    /// Normalised conditional of token `pos` in document `m` given all other assignments.
    pub fn token_conditional(&self, state: &LdaState, m: usize, pos: usize) -> Vec<f64> {
        let word = self.corpus.documents[m][pos] as usize;
        let topic = state.assignments[m][pos] as usize;
        let mut tmp = state.clone();
        self.remove(&mut tmp, m, word, topic);
        let mut w = vec![0.0; self.topics];
        self.fill_weights(&tmp, m, word, &mut w);
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|p| *p /= s);
        w
    }

    fn token_gibbs_with<R: Rng + ?Sized>(
        &self,
        state: &mut LdaState,
        m: usize,
        pos: usize,
        rng: &mut R,
        weights: &mut [f64],
    ) -> usize {
        let word = self.corpus.documents[m][pos] as usize;
        let old = state.assignments[m][pos] as usize;
        self.remove(state, m, word, old);
        self.fill_weights(state, m, word, weights);
        let total: f64 = weights.iter().sum();
        let mut u = rng.gen::<f64>() * total;
        let mut topic = self.topics - 1;
        for (t, w) in weights.iter().enumerate() {
            if u < *w {
                topic = t;
                break;
            }
            u -= w;
        }
        self.add(state, m, word, topic);
        state.assignments[m][pos] = topic as u16;
        topic
    }

    /// Resample the topic of token `pos` in document `m`; returns the new topic.
    pub fn token_gibbs<R: Rng + ?Sized>(
        &self,
        state: &mut LdaState,
        m: usize,
        pos: usize,
        rng: &mut R,
    ) -> usize {
        let mut w = vec![0.0; self.topics];
        self.token_gibbs_with(state, m, pos, rng, &mut w)
    }

    fn proportions(&self, state: &LdaState, m: usize, out: &mut [f64]) {
        let k = self.topics;
        let n = self.corpus.documents[m].len().max(1) as f64;
        for (t, slot) in out.iter_mut().enumerate() {
            *slot = state.doc_topic[m * k + t] as f64 / n;
        }
    }

    /// `phi_kv = (n_kv + beta) / (n_k + V beta)`, `K x V` row-major.
    pub fn phi_hat(&self, state: &LdaState) -> Vec<f64> {
        let (k, v) = (self.topics, self.vocab_size());
        let vb = v as f64 * self.beta;
        (0..k * v)
            .map(|i| {
                (state.topic_word[i] as f64 + self.beta) / (state.topic_total[i / v] as f64 + vb)
            })
            .collect()
    }

    /// `theta_mk = (n_mk + alpha) / (n_m + K alpha)`, `M x K` row-major.
    pub fn theta_hat(&self, state: &LdaState) -> Vec<f64> {
        let k = self.topics;
        let ka = k as f64 * self.alpha;
        (0..self.corpus.len() * k)
            .map(|i| {
                let n_m = self.corpus.documents[i / k].len() as f64;
                (state.doc_topic[i] as f64 + self.alpha) / (n_m + ka)
            })
            .collect()
    }
}

impl GibbsModel for LdaModel {
    type State = LdaState;

    fn dimension(&self) -> usize {
        self.corpus.len()
    }

    fn update<R: Rng + ?Sized>(&self, state: &mut LdaState, index: usize, rng: &mut R) {
        let k = self.topics;
        let mut before = vec![0.0; k];
        let mut after = vec![0.0; k];
        let mut weights = vec![0.0; k];
        self.proportions(state, index, &mut before);
        for pos in 0..self.corpus.documents[index].len() {
            self.token_gibbs_with(state, index, pos, rng, &mut weights);
        }
        self.proportions(state, index, &mut after);
        state.last_jump[index] = before
            .iter()
            .zip(&after)
            .map(|(a, b)| (b - a).powi(2))
            .sum();
    }

    fn scalar_summary(&self, state: &LdaState, index: usize) -> f64 {
        state.last_jump[index]
    }

    fn summary_kind(&self) -> SummaryKind {
        SummaryKind::SquaredJump
    }

    fn record_width(&self) -> usize {
        0
    }

    fn record(&self, _state: &LdaState, _out: &mut Vec<f64>) {}
}

/// Synthetic bars data: a 4x4 pixel grid as a 16-word vocabulary, with one
/// topic per row and per column.
#[derive(Clone, Debug)]
pub struct BarsCorpus {
    pub corpus: Corpus,
    /// 8 topics over 16 words, each uniform on its bar.
    pub topics: Vec<Vec<f64>>,
    /// Per-document mixing proportions used by the generator.
    pub mixtures: Vec<Vec<f64>>,
}

pub const BARS_GRID: usize = 4;
pub const BARS_DOCUMENTS: usize = 2000;
pub const BARS_DOCUMENT_LENGTH: usize = 100;

/// The eight bar topics: rows first, then columns.
pub fn bar_topics() -> Vec<Vec<f64>> {
    let g = BARS_GRID;
    let mut topics = Vec::with_capacity(2 * g);
    for r in 0..g {
        let mut t = vec![0.0; g * g];
        (0..g).for_each(|c| t[r * g + c] = 1.0 / g as f64);
        topics.push(t);
    }
    for c in 0..g {
        let mut t = vec![0.0; g * g];
        (0..g).for_each(|r| t[r * g + c] = 1.0 / g as f64);
        topics.push(t);
    }
    topics
}

pub fn make_bars_corpus<R: Rng + ?Sized>(rng: &mut R) -> BarsCorpus {
    make_bars_corpus_with(BARS_DOCUMENTS, BARS_DOCUMENT_LENGTH, rng)
}

/// Mixtures are Dirichlet(1, ..., 1); each token picks a topic from the
/// mixture and then one of that bar's four cells uniformly.
pub fn make_bars_corpus_with<R: Rng + ?Sized>(
    documents: usize,
    length: usize,
    rng: &mut R,
) -> BarsCorpus {
    let topics = bar_topics();
    let support: Vec<Vec<u32>> = topics
        .iter()
        .map(|t| {
            (0..t.len())
                .filter(|&w| t[w] > 0.0)
                .map(|w| w as u32)
                .collect()
        })
        .collect();
    let dirichlet = Dirichlet::new_with_size(1.0, topics.len()).expect("valid concentration");
    let mut docs = Vec::with_capacity(documents);
    let mut mixtures = Vec::with_capacity(documents);
    for _ in 0..documents {
        let theta = dirichlet.sample(rng);
        let doc = (0..length)
            .map(|_| {
                let mut u = rng.gen::<f64>();
                let mut topic = theta.len() - 1;
                for (t, p) in theta.iter().enumerate() {
                    if u < *p {
                        topic = t;
                        break;
                    }
                    u -= p;
                }
                let cells = &support[topic];
                cells[rng.gen_range(0..cells.len())]
            })
            .collect();
        docs.push(doc);
        mixtures.push(theta);
    }
    BarsCorpus {
        corpus: Corpus::new(docs, BARS_GRID * BARS_GRID).expect("bar words are in range"),
        topics,
        mixtures,
    }
}
