use std::path::Path;

use serde::Serialize;
use weighted_gibbs::diagnostics::{relative_l2_error, spearman};
use weighted_gibbs::engine::auxiliary_rng;
use weighted_gibbs::models::io::{synthetic_portrait, write_float_matrix, GrayImage};
use weighted_gibbs::models::{corrupt_image, IsingDenoiseTarget};
use weighted_gibbs::{run_chain_observed, ChainTrace};

use super::{plateau_reached, streams, Unrecorded};
use crate::config::{make_scheduler, ExperimentConfig, SchedulerKind};
use crate::error::{CliError, CliResult};
use crate::output::{self, float, header};

/// Relative band around the final error that counts as having converged.
pub const PLATEAU_TOLERANCE: f64 = 0.05;

pub struct Setup {
    pub height: usize,
    pub width: usize,
    pub truth: Vec<i8>,
    pub model: IsingDenoiseTarget,
    /// `sign(Y)`, the starting state of every chain.
    pub initial: Vec<i8>,
    pub noisy_error: f64,
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> CliResult<Self> {
        let s = config.ising();
        let image = match &s.image {
            Some(path) => GrayImage::read_pgm(path).map_err(|e| CliError::at(path, e))?,
            None => synthetic_portrait(s.size, s.size),
        };
        Self::from_image(&image, config)
    }

    pub fn from_image(image: &GrayImage, config: &ExperimentConfig) -> CliResult<Self> {
        let s = config.ising();
        if !(s.sigma > 0.0) {
            return Err(CliError::Config(format!(
                "ising.sigma must be positive, got {}",
                s.sigma
            )));
        }
        if s.eval_every == 0 {
            return Err(CliError::Config("ising.eval_every must be positive".into()));
        }
        let truth = image.binarize();
        let mut rng = auxiliary_rng(config.chain.seed, streams::DATA);
        let observed = corrupt_image(&truth, s.sigma, &mut rng)?;
        let model =
            IsingDenoiseTarget::new(image.height, image.width, observed, s.coupling, s.sigma)?;
        let initial = model.sign_of_observed();
        let noisy_error = relative_l2_error(&spins_f64(&truth), &spins_f64(&initial))?;
        Ok(Self {
            height: image.height,
            width: image.width,
            truth,
            model,
            initial,
            noisy_error,
        })
    }

    /// Shared inputs: the binarized truth and the noisy observation.
    pub fn write_inputs(&self, dir: &Path) -> CliResult<()> {
        let (h, w) = (self.height, self.width);
        let at = |name: &str| dir.join(name);
        GrayImage::from_spins(h, w, &self.truth)?
            .write_pgm(&at("truth.pgm"))
            .map_err(|e| CliError::at(at("truth.pgm"), e))?;
        write_float_matrix(&at("noisy.f32"), h, w, self.model.observed())
            .map_err(|e| CliError::at(at("noisy.f32"), e))?;
        GrayImage::from_signed(h, w, self.model.observed())?
            .write_pgm(&at("noisy.pgm"))
            .map_err(|e| CliError::at(at("noisy.pgm"), e))
    }
}

fn spins_f64(s: &[i8]) -> Vec<f64> {
    s.iter().map(|&v| v as f64).collect()
}

pub struct Outcome {
    pub scheduler: SchedulerKind,
    pub trace: ChainTrace,
    /// `(iteration, relative L2 error of the running posterior mean)`,
    /// starting with the initial state at iteration 0.
    pub errors: Vec<(u64, f64)>,
    /// `(iteration, log density, mean spin)` at every recorded state.
    pub states: Vec<(u64, f64, f64)>,
    pub posterior_mean: Vec<f64>,
}

impl Outcome {
    pub fn final_error(&self) -> f64 {
        self.errors.last().map(|e| e.1).unwrap_or(f64::NAN)
    }

    /// `1 - m_i^2` from the posterior mean spins.
    pub fn posterior_variance(&self) -> Vec<f64> {
        self.posterior_mean.iter().map(|m| 1.0 - m * m).collect()
    }

    pub fn plateau(&self) -> Option<(u64, f64)> {
        plateau_reached(&self.errors, PLATEAU_TOLERANCE)
    }
}

/// The posterior mean averages the states recorded after burn-in; during
/// burn-in the error is that of the current state.
pub fn run(setup: &Setup, config: &ExperimentConfig, kind: SchedulerKind) -> CliResult<Outcome> {
    let s = config.ising();
    let d = setup.truth.len();
    let per_iteration = config.chain.steps_per_iteration(d);
    let chain = config.chain.to_chain_config(d)?;
    let mut scheduler = make_scheduler(kind, d, &config.weighted)?;
    let truth = spins_f64(&setup.truth);

    let mut sum = vec![0.0; d];
    let mut n = 0usize;
    let mut estimate = vec![0.0; d];
    let mut errors = vec![(0, setup.noisy_error)];
    let mut states = Vec::new();
    let mut failure = None;
    let trace = run_chain_observed(
        &Unrecorded(&setup.model),
        &mut scheduler,
        &chain,
        setup.initial.clone(),
        |step, x| {
            let it = step / per_iteration;
            if it > config.chain.burn_in {
                n += 1;
                for ((acc, e), &v) in sum.iter_mut().zip(estimate.iter_mut()).zip(x) {
                    *acc += v as f64;
                    *e = *acc / n as f64;
                }
            } else {
                for (e, &v) in estimate.iter_mut().zip(x) {
                    *e = v as f64;
                }
            }
            let mean_spin = x.iter().map(|&v| v as f64).sum::<f64>() / d as f64;
            states.push((it, setup.model.log_density(x), mean_spin));
            if it % s.eval_every == 0 || it == config.chain.iterations {
                match relative_l2_error(&truth, &estimate) {
                    Ok(err) => errors.push((it, err)),
                    Err(e) => failure = Some(e),
                }
            }
        },
    )?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(Outcome {
        scheduler: kind,
        trace,
        errors,
        states,
        posterior_mean: estimate,
    })
}

#[derive(Serialize)]
struct Summary {
    kind: &'static str,
    scheduler: &'static str,
    seed: u64,
    iterations: u64,
    burn_in: u64,
    height: usize,
    width: usize,
    sigma: f64,
    coupling: f64,
    noisy_error: f64,
    final_error: f64,
    plateau_error: Option<f64>,
    plateau_iteration: Option<u64>,
    weight_variance_spearman: Option<f64>,
}

pub fn write(
    outcome: &Outcome,
    setup: &Setup,
    config: &ExperimentConfig,
    dir: &Path,
) -> CliResult<()> {
    let s = config.ising();
    let (h, w) = (setup.height, setup.width);
    let d = h * w;
    let trace = &outcome.trace;

    output::write_csv(
        &dir.join("error.csv"),
        &header(&["iteration", "relative_error"]),
        outcome
            .errors
            .iter()
            .map(|(it, e)| vec![it.to_string(), float(*e)]),
    )?;
    output::write_csv(
        &dir.join("trace.csv"),
        &header(&["iteration", "log_density", "mean_spin"]),
        outcome
            .states
            .iter()
            .map(|(it, l, m)| vec![it.to_string(), float(*l), float(*m)]),
    )?;
    let recovered: Vec<i8> = outcome
        .posterior_mean
        .iter()
        .map(|&m| if m >= 0.0 { 1 } else { -1 })
        .collect();
    let path = dir.join("recovered.pgm");
    GrayImage::from_spins(h, w, &recovered)?
        .write_pgm(&path)
        .map_err(|e| CliError::at(&path, e))?;
    let path = dir.join("posterior_mean.pgm");
    GrayImage::from_signed(h, w, &outcome.posterior_mean)?
        .write_pgm(&path)
        .map_err(|e| CliError::at(&path, e))?;
    output::write_selections(&dir.join("selections.csv"), trace, d)?;

    let mut correlation = None;
    if outcome.scheduler == SchedulerKind::Weighted {
        let q = output::final_weights(trace, d);
        let var = outcome.posterior_variance();
        output::write_csv(
            &dir.join("weight_map.csv"),
            &header(&["pixel", "row", "col", "weight", "posterior_variance"]),
            (0..d).map(|i| {
                vec![
                    i.to_string(),
                    (i / w).to_string(),
                    (i % w).to_string(),
                    float(q[i]),
                    float(var[i]),
                ]
            }),
        )?;
        correlation = spearman(&q, &var).ok();
        let rows = output::weight_rows(
            trace,
            d,
            config.chain.steps_per_iteration(d),
            config.chain.iterations,
            config.weighted.snapshot_every,
        );
        output::write_weights(&dir.join("weights.csv"), &rows, d)?;
    }

    let plateau = outcome.plateau();
    output::write_json(
        &dir.join("summary.json"),
        &Summary {
            kind: "ising",
            scheduler: outcome.scheduler.name(),
            seed: config.chain.seed,
            iterations: config.chain.iterations,
            burn_in: config.chain.burn_in,
            height: h,
            width: w,
            sigma: s.sigma,
            coupling: s.coupling,
            noisy_error: setup.noisy_error,
            final_error: outcome.final_error(),
            plateau_error: plateau.map(|p| p.1),
            plateau_iteration: plateau.map(|p| p.0),
            weight_variance_spearman: correlation,
        },
    )
}
