use std::path::Path;

use serde::Serialize;
use weighted_gibbs::diagnostics::{lda_log_likelihood, lda_perplexity, match_topics, TopicMatch};
use weighted_gibbs::engine::auxiliary_rng;
use weighted_gibbs::models::io::{read_corpus, read_vocabulary};
use weighted_gibbs::models::{make_bars_corpus_with, Corpus, LdaModel, LdaState};
use weighted_gibbs::{run_chain_observed, ChainTrace};

use super::{streams, Unrecorded};
use crate::config::{make_scheduler, ExperimentConfig, LdaSection, SchedulerKind};
use crate::error::{CliError, CliResult};
use crate::output::{self, float, header};

pub struct Setup {
    pub model: LdaModel,
    pub heldout: Option<Corpus>,
    /// Generating topics, known for the bars corpus only.
    pub true_topics: Option<Vec<Vec<f64>>>,
    pub initial: LdaState,
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> CliResult<Self> {
        let s = config.lda();
        if s.topics == 0 || s.topics > u16::MAX as usize {
            return Err(CliError::Config(format!(
                "lda.topics must be in 1..=65535, got {}",
                s.topics
            )));
        }
        if s.eval_every == 0 {
            return Err(CliError::Config("lda.eval_every must be positive".into()));
        }
        let seed = config.chain.seed;
        let (train, heldout, true_topics) = if s.corpus == "bars" {
            let bars = make_bars_corpus_with(
                s.documents,
                s.document_length,
                &mut auxiliary_rng(seed, streams::DATA),
            );
            let heldout = (s.heldout_documents > 0).then(|| {
                make_bars_corpus_with(
                    s.heldout_documents,
                    s.document_length,
                    &mut auxiliary_rng(seed, streams::HELDOUT),
                )
                .corpus
            });
            (bars.corpus, heldout, Some(bars.topics))
        } else {
            let (train, heldout) = load_corpora(&s)?;
            (train, heldout, None)
        };
        let model = LdaModel::new(train, s.topics, s.alpha, s.beta)
            .map_err(|e| CliError::Config(format!("[lda]: {e}")))?;
        let initial = model.initial_state(&mut auxiliary_rng(seed, streams::INIT));
        Ok(Self {
            model,
            heldout,
            true_topics,
            initial,
        })
    }
}

fn load_corpora(s: &LdaSection) -> CliResult<(Corpus, Option<Corpus>)> {
    let path = Path::new(&s.corpus);
    let vocab = match &s.vocabulary {
        Some(p) => Some(read_vocabulary(p).map_err(|e| CliError::at(p, e))?.len()),
        None => None,
    };
    let mut train = read_corpus(path, vocab).map_err(|e| CliError::at(path, e))?;
    let mut heldout = match &s.heldout {
        Some(p) => Some(read_corpus(p, vocab).map_err(|e| CliError::at(p, e))?),
        None if s.heldout_documents > 0 && s.heldout_documents < train.len() => {
            let mut docs = train.documents;
            let tail = docs.split_off(docs.len() - s.heldout_documents);
            train = Corpus::new(docs, train.vocab_size)?;
            Some(Corpus::new(tail, train.vocab_size)?)
        }
        None => None,
    };
    if vocab.is_none() {
        // Without a vocabulary file both corpora share the larger id range.
        let v = train
            .vocab_size
            .max(heldout.as_ref().map_or(0, |h| h.vocab_size));
        train = Corpus::new(train.documents, v)?;
        heldout = heldout.map(|h| Corpus::new(h.documents, v)).transpose()?;
    }
    Ok((train, heldout))
}

pub struct Outcome {
    pub scheduler: SchedulerKind,
    pub trace: ChainTrace,
    /// `(iteration, training log-likelihood)`, iteration 0 is the initial state.
    pub log_likelihood: Vec<(u64, f64)>,
    pub perplexity: Vec<(u64, f64)>,
    /// `(iteration, mean squared topic-proportion jump at the latest visits)`.
    pub jumps: Vec<(u64, f64)>,
    pub final_state: LdaState,
    pub matches: Option<Vec<TopicMatch>>,
}

impl Outcome {
    pub fn log_likelihood_at(&self, iteration: u64) -> Option<f64> {
        self.log_likelihood
            .iter()
            .find(|p| p.0 == iteration)
            .map(|p| p.1)
    }

    pub fn max_topic_distance(&self) -> Option<f64> {
        self.matches
            .as_ref()
            .map(|m| m.iter().map(|t| t.distance).fold(0.0, f64::max))
    }
}

/// Perplexity at iteration `t` folds in with the same random stream for
/// every scheduler.
pub fn run(setup: &Setup, config: &ExperimentConfig, kind: SchedulerKind) -> CliResult<Outcome> {
    let s = config.lda();
    let model = &setup.model;
    let d = model.corpus().len();
    let per_iteration = config.chain.steps_per_iteration(d);
    let seed = config.chain.seed;
    let chain = config.chain.to_chain_config(d)?;
    // The final state is captured by the observer, so it must be recorded.
    if config.chain.iterations % config.chain.thinning != 0 {
        return Err(CliError::Config(
            "lda: chain.thinning must divide chain.iterations".into(),
        ));
    }
    let mut scheduler = make_scheduler(kind, d, &config.weighted)?;

    let perplexity_at = |state: &LdaState, it: u64| -> Option<weighted_gibbs::Result<f64>> {
        let heldout = setup.heldout.as_ref()?;
        if s.perplexity_every == 0 || it % s.perplexity_every != 0 {
            return None;
        }
        let mut rng = auxiliary_rng(seed, streams::EVAL + it);
        Some(lda_perplexity(
            model,
            state,
            heldout,
            s.fold_in_sweeps,
            &mut rng,
        ))
    };

    let mut log_likelihood = vec![(0, lda_log_likelihood(model, &setup.initial))];
    let mut perplexity = Vec::new();
    if let Some(p) = perplexity_at(&setup.initial, 0) {
        perplexity.push((0, p?));
    }
    let mut jumps = Vec::new();
    let mut final_state = None;
    let mut failure = None;
    let last = config.chain.iterations;
    let trace = run_chain_observed(
        &Unrecorded(model),
        &mut scheduler,
        &chain,
        setup.initial.clone(),
        |step, st| {
            let it = step / per_iteration;
            jumps.push((it, st.last_jump.iter().sum::<f64>() / d as f64));
            if it % s.eval_every == 0 || it == last {
                log_likelihood.push((it, lda_log_likelihood(model, st)));
            }
            match perplexity_at(st, it) {
                Some(Ok(p)) => perplexity.push((it, p)),
                Some(Err(e)) => failure = Some(e),
                None => {}
            }
            if it == last {
                final_state = Some(st.clone());
            }
        },
    )?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    let final_state = final_state.expect("final iteration is recorded");
    let matches = setup.true_topics.as_ref().map(|truth| {
        let phi = model.phi_hat(&final_state);
        let v = model.vocab_size();
        let learned: Vec<Vec<f64>> = phi.chunks(v).map(|c| c.to_vec()).collect();
        match_topics(truth, &learned)
    });
    Ok(Outcome {
        scheduler: kind,
        trace,
        log_likelihood,
        perplexity,
        jumps,
        final_state,
        matches,
    })
}

#[derive(Serialize)]
struct Summary {
    kind: &'static str,
    scheduler: &'static str,
    seed: u64,
    iterations: u64,
    documents: usize,
    tokens: usize,
    topics: usize,
    alpha: f64,
    beta: f64,
    final_log_likelihood: Option<f64>,
    final_perplexity: Option<f64>,
    max_topic_distance: Option<f64>,
}

pub fn write(
    outcome: &Outcome,
    setup: &Setup,
    config: &ExperimentConfig,
    dir: &Path,
) -> CliResult<()> {
    let model = &setup.model;
    let corpus = model.corpus();
    let d = corpus.len();
    let (k, v) = (model.topics(), model.vocab_size());
    let trace = &outcome.trace;

    let series = |name: &str, col: &str, rows: &[(u64, f64)]| {
        output::write_csv(
            &dir.join(name),
            &header(&["iteration", col]),
            rows.iter().map(|(it, x)| vec![it.to_string(), float(*x)]),
        )
    };
    series("loglik.csv", "log_likelihood", &outcome.log_likelihood)?;
    if setup.heldout.is_some() {
        series("perplexity.csv", "perplexity", &outcome.perplexity)?;
    }
    series("trace.csv", "mean_theta_jump", &outcome.jumps)?;

    let phi = model.phi_hat(&outcome.final_state);
    output::write_csv(
        &dir.join("topics.csv"),
        &header(&["topic", "word", "probability"]),
        (0..k).flat_map(|t| {
            let phi = &phi;
            (0..v).map(move |w| vec![t.to_string(), w.to_string(), float(phi[t * v + w])])
        }),
    )?;
    if let Some(m) = &outcome.matches {
        output::write_csv(
            &dir.join("topic_match.csv"),
            &header(&["true_topic", "learned_topic", "total_variation"]),
            m.iter().map(|t| {
                vec![
                    t.truth.to_string(),
                    t.learned.to_string(),
                    float(t.distance),
                ]
            }),
        )?;
    }
    output::write_selections(&dir.join("selections.csv"), trace, d)?;
    if outcome.scheduler == SchedulerKind::Weighted {
        let q = output::final_weights(trace, d);
        output::write_csv(
            &dir.join("doc_weights.csv"),
            &header(&["document", "length", "weight"]),
            (0..d).map(|m| {
                vec![
                    m.to_string(),
                    corpus.documents[m].len().to_string(),
                    float(q[m]),
                ]
            }),
        )?;
        let rows = output::weight_rows(
            trace,
            d,
            config.chain.steps_per_iteration(d),
            config.chain.iterations,
            config.weighted.snapshot_every,
        );
        output::write_weights(&dir.join("weights.csv"), &rows, d)?;
    }

    output::write_json(
        &dir.join("summary.json"),
        &Summary {
            kind: "lda",
            scheduler: outcome.scheduler.name(),
            seed: config.chain.seed,
            iterations: config.chain.iterations,
            documents: d,
            tokens: corpus.token_count(),
            topics: k,
            alpha: model.alpha,
            beta: model.beta,
            final_log_likelihood: outcome.log_likelihood.last().map(|p| p.1),
            final_perplexity: outcome.perplexity.last().map(|p| p.1),
            max_topic_distance: outcome.max_topic_distance(),
        },
    )
}
