//! Randomised checks of the stationarity, optimal-weight and jump-distance
//! results, run as one report.

use std::path::Path;

use rand::Rng;
use serde::Serialize;
use weighted_gibbs::diagnostics::esjd_batch_means;
use weighted_gibbs::engine::auxiliary_rng;
use weighted_gibbs::models::GaussianTarget;
use weighted_gibbs::validation::{
    esjd_closed_form, esjd_monte_carlo, optimal_weights_numeric, scan_objective,
    stationarity_residual, FiniteChainSpec, MonteCarloEstimate,
};
use weighted_gibbs::{compute_weights, run_chain, ChainConfig, SelectionWeights, UniformScheduler};

use super::streams;
use crate::config::{ExperimentConfig, ValidateSection};
use crate::error::{CliError, CliResult};
use crate::output::{self, float, header};

pub const STATIONARITY_TOLERANCE: f64 = 1e-10;
pub const WEIGHT_TOLERANCE: f64 = 1e-6;
pub const OBJECTIVE_TOLERANCE: f64 = 1e-9;
pub const Z_LIMIT: f64 = 3.0;

/// Largest state space of a random finite chain.
const MAX_STATES: usize = 16;
const MAX_VARIABLES: usize = 3;
const BATCHES: usize = 50;

#[derive(Clone, Debug, Serialize)]
pub struct StationarityCheck {
    pub states: usize,
    pub variables: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimalWeightCheck {
    pub dimension: usize,
    /// Largest coordinate gap between the numeric optimum and the
    /// square-root weights.
    pub max_weight_error: f64,
    /// Relative gap between the optimum objective and `(sum sqrt d_i)^2`.
    pub objective_error: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct JumpCheck {
    pub q: Vec<f64>,
    pub d: Vec<f64>,
    pub lag: u32,
    pub closed_form: f64,
    pub monte_carlo: MonteCarloEstimate,
    /// From a diagonal Gaussian chain with marginal variances `d_i / 2`.
    pub empirical_mean: f64,
    pub empirical_se: f64,
}

impl JumpCheck {
    pub fn z_monte_carlo(&self) -> f64 {
        (self.monte_carlo.mean - self.closed_form) / self.monte_carlo.standard_error
    }

    pub fn z_empirical(&self) -> f64 {
        (self.empirical_mean - self.closed_form) / self.empirical_se
    }

    pub fn z_empirical_vs_monte_carlo(&self) -> f64 {
        (self.empirical_mean - self.monte_carlo.mean)
            / self.empirical_se.hypot(self.monte_carlo.standard_error)
    }

    pub fn passed(&self) -> bool {
        [
            self.z_monte_carlo(),
            self.z_empirical(),
            self.z_empirical_vs_monte_carlo(),
        ]
        .iter()
        .all(|z| z.abs() <= Z_LIMIT)
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub stationarity: Vec<StationarityCheck>,
    pub optimal_weights: Vec<OptimalWeightCheck>,
    pub jumps: Vec<JumpCheck>,
}

impl ValidationReport {
    pub fn max_residual(&self) -> f64 {
        self.stationarity
            .iter()
            .map(|c| c.residual)
            .fold(0.0, f64::max)
    }

    pub fn max_weight_error(&self) -> f64 {
        self.optimal_weights
            .iter()
            .map(|c| c.max_weight_error)
            .fold(0.0, f64::max)
    }

    pub fn max_objective_error(&self) -> f64 {
        self.optimal_weights
            .iter()
            .map(|c| c.objective_error)
            .fold(0.0, f64::max)
    }

    pub fn max_abs_z(&self) -> f64 {
        self.jumps
            .iter()
            .flat_map(|j| {
                [
                    j.z_monte_carlo(),
                    j.z_empirical(),
                    j.z_empirical_vs_monte_carlo(),
                ]
            })
            .map(f64::abs)
            .fold(0.0, f64::max)
    }

    pub fn stationarity_passed(&self) -> bool {
        self.max_residual() <= STATIONARITY_TOLERANCE
    }

    pub fn optimal_weights_passed(&self) -> bool {
        self.max_weight_error() <= WEIGHT_TOLERANCE
            && self.max_objective_error() <= OBJECTIVE_TOLERANCE
    }

    pub fn jumps_passed(&self) -> bool {
        self.jumps.iter().all(JumpCheck::passed)
    }

    pub fn print(&self) {
        let verdict = |ok: bool| if ok { "ok" } else { "FAILED" };
        println!(
            "stationarity     {:>4} chains   max residual {:.3e}              {}",
            self.stationarity.len(),
            self.max_residual(),
            verdict(self.stationarity_passed())
        );
        println!(
            "optimal weights  {:>4} vectors  max |q - q*| {:.3e}  objective {:.3e}  {}",
            self.optimal_weights.len(),
            self.max_weight_error(),
            self.max_objective_error(),
            verdict(self.optimal_weights_passed())
        );
        println!(
            "jump distance    {:>4} configs  max |z| {:.3}                      {}",
            self.jumps.len(),
            self.max_abs_z(),
            verdict(self.jumps_passed())
        );
    }

    pub fn ensure_passed(&self) -> CliResult<()> {
        if self.stationarity_passed() && self.optimal_weights_passed() && self.jumps_passed() {
            Ok(())
        } else {
            Err(CliError::Numeric("validation failed".into()))
        }
    }
}

pub fn stationarity_suite<R: Rng + ?Sized>(
    chains: usize,
    rng: &mut R,
) -> CliResult<Vec<StationarityCheck>> {
    (0..chains)
        .map(|_| {
            let spec = FiniteChainSpec::random(rng, MAX_VARIABLES, MAX_STATES);
            Ok(StationarityCheck {
                states: spec.states.len(),
                variables: spec.dimension(),
                residual: stationarity_residual(&spec)?,
            })
        })
        .collect()
}

/// Entries are log-uniform on `[0.01, 100]`, dimension uniform on `2..=10`.
pub fn random_variances<R: Rng + ?Sized>(rng: &mut R) -> Vec<f64> {
    let n = rng.gen_range(2..=10);
    (0..n)
        .map(|_| 10f64.powf(rng.gen_range(-2.0..=2.0)))
        .collect()
}

pub fn optimal_weight_suite<R: Rng + ?Sized>(
    vectors: usize,
    rng: &mut R,
) -> CliResult<Vec<OptimalWeightCheck>> {
    (0..vectors)
        .map(|_| {
            let d = random_variances(rng);
            let numeric = optimal_weights_numeric(&d)?;
            let analytic = compute_weights(&d, 0.0)?;
            let bound = d.iter().map(|v| v.sqrt()).sum::<f64>().powi(2);
            let objective = scan_objective(numeric.weights.probabilities(), &d)?;
            Ok(OptimalWeightCheck {
                dimension: d.len(),
                max_weight_error: numeric
                    .weights
                    .probabilities()
                    .iter()
                    .zip(analytic.probabilities())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
                objective_error: (objective - bound).abs() / bound,
                iterations: numeric.iterations,
            })
        })
        .collect()
}

/// Random mean-field configuration: 2 to 6 variables, positive weights,
/// `d_i` in `[0.1, 10]`, lag 1 to 10.
fn random_jump_config<R: Rng + ?Sized>(rng: &mut R) -> (Vec<f64>, Vec<f64>, u32) {
    let n = rng.gen_range(2..=6);
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut q: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let residue = 1.0 - q.iter().sum::<f64>();
    q[0] += residue;
    let d = (0..n).map(|_| rng.gen_range(0.1..10.0)).collect();
    (q, d, rng.gen_range(1..=10))
}

pub fn jump_suite<R: Rng + ?Sized>(
    configs: usize,
    trials: usize,
    chain_steps: u64,
    rng: &mut R,
) -> CliResult<Vec<JumpCheck>> {
    (0..configs)
        .map(|_| {
            let (q, d, lag) = random_jump_config(rng);
            let weights = SelectionWeights::new(q.clone())?;
            let closed_form = esjd_closed_form(&q, &d, lag)?;
            let monte_carlo = esjd_monte_carlo(&weights, &d, lag, trials, rng)?;
            let variances: Vec<f64> = d.iter().map(|v| v / 2.0).collect();
            let target = GaussianTarget::diagonal(&variances)?;
            let mut scheduler = UniformScheduler::with_weights(weights);
            let cfg = ChainConfig::new(chain_steps, rng.gen())
                .with_burn_in(chain_steps / 100)
                .with_initial_sweeps(0);
            let trace = run_chain(&target, &mut scheduler, &cfg, vec![0.0; d.len()])?;
            let batch = esjd_batch_means(&trace, lag as usize, BATCHES)?;
            Ok(JumpCheck {
                q,
                d,
                lag,
                closed_form,
                monte_carlo,
                empirical_mean: batch.mean,
                empirical_se: batch.standard_error,
            })
        })
        .collect()
}

pub fn run(config: &ExperimentConfig) -> CliResult<ValidationReport> {
    run_section(&config.validate(), config.chain.seed)
}

pub fn run_section(v: &ValidateSection, seed: u64) -> CliResult<ValidationReport> {
    if v.trials < 2 || v.chain_steps < 100 * (BATCHES as u64 + 10) {
        return Err(CliError::Config(
            "validate.trials must be >= 2 and validate.chain_steps >= 6000".into(),
        ));
    }
    let mut rng = auxiliary_rng(seed, streams::DATA);
    Ok(ValidationReport {
        stationarity: stationarity_suite(v.chains, &mut rng)?,
        optimal_weights: optimal_weight_suite(v.weight_vectors, &mut rng)?,
        jumps: jump_suite(v.esjd_configs, v.trials, v.chain_steps, &mut rng)?,
    })
}

pub fn write(report: &ValidationReport, _config: &ExperimentConfig, dir: &Path) -> CliResult<()> {
    output::write_csv(
        &dir.join("stationarity.csv"),
        &header(&["chain", "states", "variables", "residual"]),
        report.stationarity.iter().enumerate().map(|(i, c)| {
            vec![
                i.to_string(),
                c.states.to_string(),
                c.variables.to_string(),
                float(c.residual),
            ]
        }),
    )?;
    output::write_csv(
        &dir.join("optimal_weights.csv"),
        &header(&[
            "vector",
            "dimension",
            "max_weight_error",
            "objective_error",
            "iterations",
        ]),
        report.optimal_weights.iter().enumerate().map(|(i, c)| {
            vec![
                i.to_string(),
                c.dimension.to_string(),
                float(c.max_weight_error),
                float(c.objective_error),
                c.iterations.to_string(),
            ]
        }),
    )?;
    output::write_csv(
        &dir.join("esjd.csv"),
        &header(&[
            "config",
            "lag",
            "closed_form",
            "monte_carlo",
            "monte_carlo_se",
            "empirical",
            "empirical_se",
        ]),
        report.jumps.iter().enumerate().map(|(i, j)| {
            vec![
                i.to_string(),
                j.lag.to_string(),
                float(j.closed_form),
                float(j.monte_carlo.mean),
                float(j.monte_carlo.standard_error),
                float(j.empirical_mean),
                float(j.empirical_se),
            ]
        }),
    )?;
    output::write_json(&dir.join("summary.json"), report)
}
