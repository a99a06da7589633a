use std::path::Path;

use serde::Serialize;
use weighted_gibbs::diagnostics::{pca_project, DiagnosticsReport, PcaProjection};
use weighted_gibbs::engine::auxiliary_rng;
use weighted_gibbs::models::{make_covariance, GaussianTarget};
use weighted_gibbs::{run_chain, ChainTrace};

use super::streams;
use crate::config::{make_scheduler, ExperimentConfig, SchedulerKind};
use crate::error::{CliError, CliResult};
use crate::output::{self, float, header, indexed_header};

pub struct Setup {
    pub target: GaussianTarget,
    pub initial: Vec<f64>,
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> CliResult<Self> {
        let g = config.gaussian();
        let mut rng = auxiliary_rng(config.chain.seed, streams::DATA);
        let target = make_covariance(g.d, g.r, g.epsilon, g.lambda_cov, &mut rng)
            .map_err(|e| CliError::Config(format!("[gaussian]: {e}")))?;
        let initial = target
            .marginal_variances()
            .iter()
            .map(|v| g.init_scale * v.sqrt())
            .collect();
        Ok(Self { target, initial })
    }
}

pub struct Outcome {
    pub scheduler: SchedulerKind,
    pub trace: ChainTrace,
    pub report: DiagnosticsReport,
    pub pca: Option<PcaProjection>,
}

pub fn run(setup: &Setup, config: &ExperimentConfig, kind: SchedulerKind) -> CliResult<Outcome> {
    let g = config.gaussian();
    let d = setup.target.dimension();
    let chain = config.chain.to_chain_config(d)?;
    let mut scheduler = make_scheduler(kind, d, &config.weighted)?;
    let trace = run_chain(&setup.target, &mut scheduler, &chain, setup.initial.clone())?;
    let report = DiagnosticsReport::from_trace(&trace, g.max_lag, &g.esjd_lags);
    let pca = pca_project(&trace.samples, d, 2).ok();
    Ok(Outcome {
        scheduler: kind,
        trace,
        report,
        pca,
    })
}

#[derive(Serialize)]
struct Summary<'a> {
    kind: &'static str,
    scheduler: &'static str,
    seed: u64,
    iterations: u64,
    burn_in: u64,
    dimension: usize,
    post_burn_in_samples: usize,
    min_ess: Option<f64>,
    mean_ess: Option<f64>,
    lag1_autocorrelation: Option<f64>,
    esjd: &'a [(usize, f64)],
    selection_frequencies: Vec<f64>,
    final_weights: Option<Vec<f64>>,
}

pub fn write(
    outcome: &Outcome,
    setup: &Setup,
    config: &ExperimentConfig,
    dir: &Path,
) -> CliResult<()> {
    let g = config.gaussian();
    let d = setup.target.dimension();
    let trace = &outcome.trace;
    let per_iteration = config.chain.steps_per_iteration(d);

    output::write_csv(
        &dir.join("trace.csv"),
        &indexed_header("iteration", "x", d),
        (0..trace.rows()).map(|r| {
            std::iter::once((trace.recorded_steps[r] / per_iteration).to_string())
                .chain(trace.row(r).iter().map(|&v| float(v)))
                .collect()
        }),
    )?;
    output::write_csv(
        &dir.join("autocorrelation.csv"),
        &header(&["lag", "autocorrelation"]),
        outcome
            .report
            .mean_autocorrelation
            .iter()
            .enumerate()
            .map(|(k, &r)| vec![k.to_string(), float(r)]),
    )?;
    output::write_csv(
        &dir.join("ess.csv"),
        &header(&["variable", "ess", "truncation_lag", "degenerate"]),
        outcome.report.ess.iter().enumerate().map(|(j, e)| match e {
            Some(e) => vec![
                j.to_string(),
                float(e.ess),
                e.truncation_lag.to_string(),
                e.degenerate.to_string(),
            ],
            None => vec![j.to_string(), String::new(), String::new(), "true".into()],
        }),
    )?;
    output::write_csv(
        &dir.join("esjd.csv"),
        &header(&["lag", "esjd"]),
        outcome
            .report
            .esjd
            .iter()
            .map(|(k, v)| vec![k.to_string(), float(*v)]),
    )?;
    if let Some(p) = &outcome.pca {
        let keep = trace.rows().min(g.pca_samples);
        output::write_csv(
            &dir.join("pca_trace.csv"),
            &header(&["iteration", "pc1", "pc2"]),
            (0..keep).map(|r| {
                vec![
                    (trace.recorded_steps[r] / per_iteration).to_string(),
                    float(p.scores[2 * r]),
                    float(p.scores[2 * r + 1]),
                ]
            }),
        )?;
    }
    output::write_selections(&dir.join("selections.csv"), trace, d)?;
    let weighted = outcome.scheduler == SchedulerKind::Weighted;
    if weighted {
        let rows = output::weight_rows(
            trace,
            d,
            config.chain.steps_per_iteration(d),
            config.chain.iterations,
            config.weighted.snapshot_every,
        );
        output::write_weights(&dir.join("weights.csv"), &rows, d)?;
    }

    let ess: Vec<f64> = outcome.report.ess.iter().flatten().map(|e| e.ess).collect();
    let summary = Summary {
        kind: "gaussian",
        scheduler: outcome.scheduler.name(),
        seed: config.chain.seed,
        iterations: config.chain.iterations,
        burn_in: config.chain.burn_in,
        dimension: d,
        post_burn_in_samples: outcome.report.samples,
        min_ess: outcome.report.min_ess,
        mean_ess: (!ess.is_empty()).then(|| ess.iter().sum::<f64>() / ess.len() as f64),
        lag1_autocorrelation: outcome.report.mean_autocorrelation.get(1).copied(),
        esjd: &outcome.report.esjd,
        selection_frequencies: trace.selection_frequencies(d),
        final_weights: weighted.then(|| output::final_weights(trace, d)),
    };
    output::write_json(&dir.join("summary.json"), &summary)
}
