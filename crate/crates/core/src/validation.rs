//! Exact checks on small instances.
//!
//! * [`stationarity_residual`] builds the augmented chain on `Omega x {0..d}`
//!   with `P((x,i),(y,j)) = q_j P_i(x,y)` and measures how far
//!   `pi~((x,i)) = q_i pi(x)` is from being stationary.
//! * [`scan_objective`], [`esjd_closed_form`] and [`esjd_monte_carlo`] cover
//!   the mean-field jump-distance algebra behind the weighted scan.
//! * [`optimal_weights_numeric`] minimises `sum_i d_i / q_i` on the simplex
//!   by plain descent, independently of the closed form in
//!   [`compute_weights`](crate::schedulers::compute_weights).

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedulers::SelectionWeights;

const STOCHASTIC_TOLERANCE: f64 = 1e-12;

/// A finite-state Gibbs chain over `d` discrete variables.
#[derive(Clone, Debug)]
pub struct FiniteChainSpec {
    /// Number of values each variable can take.
    pub cardinalities: Vec<usize>,
    /// Joint configurations, in mixed-radix order (variable 0 fastest).
    pub states: Vec<Vec<usize>>,
    pub target: Vec<f64>,
    /// One `|Omega| x |Omega|` kernel per variable.
    pub kernels: Vec<DMatrix<f64>>,
    pub q: SelectionWeights,
}

fn enumerate_states(cardinalities: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = cardinalities.iter().product();
    (0..total)
        .map(|mut code| {
            cardinalities
                .iter()
                .map(|&c| {
                    let v = code % c;
                    code /= c;
                    v
                })
                .collect()
        })
        .collect()
}

fn agree_except(a: &[usize], b: &[usize], skip: usize) -> bool {
    a.iter()
        .zip(b)
        .enumerate()
        .all(|(j, (x, y))| j == skip || x == y)
}

impl FiniteChainSpec {
    /// Exact single-site Gibbs kernels for `target` over the given variables.
    pub fn gibbs(cardinalities: Vec<usize>, target: Vec<f64>, q: SelectionWeights) -> Result<Self> {
        if cardinalities.is_empty() || cardinalities.contains(&0) {
            return Err(Error::InvalidArgument(
                "every variable needs at least one value".into(),
            ));
        }
        let states = enumerate_states(&cardinalities);
        if target.len() != states.len() {
            return Err(Error::DimensionMismatch {
                expected: states.len(),
                actual: target.len(),
            });
        }
        let n = states.len();
        let kernels = (0..cardinalities.len())
            .map(|i| {
                DMatrix::from_fn(n, n, |x, y| {
                    if !agree_except(&states[x], &states[y], i) {
                        return 0.0;
                    }
                    let norm: f64 = (0..n)
                        .filter(|&z| agree_except(&states[x], &states[z], i))
                        .map(|z| target[z])
                        .sum();
                    target[y] / norm
                })
            })
            .collect();
        Self::new(cardinalities, target, kernels, q)
    }

    /// Validates stochasticity, normalisation and per-kernel invariance.
    pub fn new(
        cardinalities: Vec<usize>,
        target: Vec<f64>,
        kernels: Vec<DMatrix<f64>>,
        q: SelectionWeights,
    ) -> Result<Self> {
        let states = enumerate_states(&cardinalities);
        let n = states.len();
        if kernels.len() != cardinalities.len() || q.len() != cardinalities.len() {
            return Err(Error::DimensionMismatch {
                expected: cardinalities.len(),
                actual: kernels.len().min(q.len()),
            });
        }
        if target.len() != n || target.iter().any(|p| *p < 0.0) {
            return Err(Error::InvalidArgument(
                "target must be a distribution over all states".into(),
            ));
        }
        if (target.iter().sum::<f64>() - 1.0).abs() > STOCHASTIC_TOLERANCE {
            return Err(Error::InvalidArgument("target does not sum to one".into()));
        }
        for (i, p) in kernels.iter().enumerate() {
            if p.nrows() != n || p.ncols() != n {
                return Err(Error::ShapeMismatch(format!("kernel {i} is not {n}x{n}")));
            }
            for x in 0..n {
                let row = p.row(x).sum();
                if (row - 1.0).abs() > STOCHASTIC_TOLERANCE || p.row(x).iter().any(|v| *v < 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "kernel {i} row {x} is not stochastic (sum {row})"
                    )));
                }
            }
        }
        Ok(Self {
            cardinalities,
            states,
            target,
            kernels,
            q,
        })
    }

    /// Random strictly positive target over at most `max_states` joint
    /// states and at most `max_vars` variables, with random positive `q`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_vars: usize, max_states: usize) -> Self {
        loop {
            let d = rng.gen_range(1..=max_vars);
            let cardinalities: Vec<usize> = (0..d).map(|_| rng.gen_range(2..=4)).collect();
            let n: usize = cardinalities.iter().product();
            if n > max_states {
                continue;
            }
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let target = raw.into_iter().map(|p| p / total).collect();
            let qraw: Vec<f64> = (0..d).map(|_| rng.gen_range(0.05..1.0)).collect();
            let qtotal: f64 = qraw.iter().sum();
            let mut q: Vec<f64> = qraw.iter().map(|p| p / qtotal).collect();
            let residue = 1.0 - q.iter().sum::<f64>();
            q[0] += residue;
            let q = SelectionWeights::new(q).expect("normalised positive weights");
            return Self::gibbs(cardinalities, target, q).expect("valid random chain");
        }
    }

    pub fn dimension(&self) -> usize {
        self.cardinalities.len()
    }

    /// Largest `|(pi P_i)(y) - pi(y)|` over all kernels and states.
    pub fn kernel_invariance_residual(&self) -> f64 {
        let pi = DMatrix::from_row_slice(1, self.target.len(), &self.target);
        self.kernels
            .iter()
            .map(|p| (&pi * p - &pi).amax())
            .fold(0.0, f64::max)
    }

    pub fn augmented(&self) -> AugmentedChain {
        AugmentedChain::new(self)
    }
}

/// The chain on `Omega x {0..d}` pairing each state with the index of the
/// variable to sample next.
#[derive(Clone, Debug)]
pub struct AugmentedChain {
    pub transition: DMatrix<f64>,
    pub candidate: Vec<f64>,
    dimension: usize,
}

impl AugmentedChain {
    fn new(spec: &FiniteChainSpec) -> Self {
        let n = spec.states.len();
        let d = spec.dimension();
        let q = spec.q.probabilities();
        let at = |x: usize, i: usize| x * d + i;
        let mut transition = DMatrix::zeros(n * d, n * d);
        for x in 0..n {
            for i in 0..d {
                for y in 0..n {
                    let p = spec.kernels[i][(x, y)];
                    if p == 0.0 {
                        continue;
                    }
                    for (j, qj) in q.iter().enumerate() {
                        transition[(at(x, i), at(y, j))] = qj * p;
                    }
                }
            }
        }
        let candidate = (0..n * d).map(|s| q[s % d] * spec.target[s / d]).collect();
        Self {
            transition,
            candidate,
            dimension: d,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn row_sum_residual(&self) -> f64 {
        (0..self.transition.nrows())
            .map(|r| (self.transition.row(r).sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `max |pi~^T P - pi~^T|` on the augmented chain.
pub fn stationarity_residual(spec: &FiniteChainSpec) -> Result<f64> {
    let chain = spec.augmented();
    let rows = chain.row_sum_residual();
    if rows > STOCHASTIC_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "augmented transition matrix is not stochastic (residual {rows})"
        )));
    }
    let pi = DMatrix::from_row_slice(1, chain.candidate.len(), &chain.candidate);
    Ok((&pi * &chain.transition - &pi).amax())
}

fn check_lengths(q: &[f64], d: &[f64]) -> Result<()> {
    if q.len() != d.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            actual: d.len(),
        });
    }
    Ok(())
}

/// `sum_i d_i / q_i`.
pub fn scan_objective(q: &[f64], d: &[f64]) -> Result<f64> {
    check_lengths(q, d)?;
    let mut total = 0.0;
    for (&qi, &di) in q.iter().zip(d) {
        if di < 0.0 {
            return Err(Error::InvalidArgument(format!("negative d entry {di}")));
        }
        if di == 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return Err(Error::InvalidWeights(format!(
                "q_i = {qi} for a variable with d_i = {di}"
            )));
        }
        total += di / qi;
    }
    Ok(total)
}

/// `sum_i d_i (1 - q_i) / q_i`: the exact value of
/// `sum_{k>=1} sum_i (1 - q_i)^k d_i`. It differs from [`scan_objective`]
/// by the constant `sum_i d_i`.
pub fn unvisited_series(q: &[f64], d: &[f64]) -> Result<f64> {
    Ok(scan_objective(q, d)? - d.iter().sum::<f64>())
}

/// Lag-`k` jump distance under the mean-field model:
/// `sum_i (1 - (1 - q_i)^k) d_i`.
pub fn esjd_closed_form(q: &[f64], d: &[f64], k: u32) -> Result<f64> {
    check_lengths(q, d)?;
    Ok(q.iter()
        .zip(d)
        .map(|(&qi, &di)| (1.0 - (1.0 - qi).powi(k as i32)) * di)
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub trials: usize,
}

/// Simulate the visit process behind [`esjd_closed_form`].
///
/// Each trial starts every variable at an independent draw from
/// `N(0, d_i / 2)`, takes `k` steps that each pick `i ~ q` and redraw it
/// from the same marginal, and records the total squared displacement.
pub fn esjd_monte_carlo<R: Rng + ?Sized>(
    q: &SelectionWeights,
    d: &[f64],
    k: u32,
    trials: usize,
    rng: &mut R,
) -> Result<MonteCarloEstimate> {
    check_lengths(q.probabilities(), d)?;
    if trials < 2 {
        return Err(Error::InvalidArgument("need at least two trials".into()));
    }
    let marginals = d
        .iter()
        .map(|&di| {
            Normal::new(0.0, (di / 2.0).sqrt())
                .map_err(|e| Error::InvalidArgument(format!("d entry {di}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut start = vec![0.0; d.len()];
    let mut current = vec![0.0; d.len()];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..trials {
        for (i, m) in marginals.iter().enumerate() {
            start[i] = m.sample(rng);
        }
        current.copy_from_slice(&start);
        for _ in 0..k {
            let i = q.sample(rng);
            current[i] = marginals[i].sample(rng);
        }
        let jump: f64 = start
            .iter()
            .zip(&current)
            .map(|(a, b)| (b - a).powi(2))
            .sum();
        sum += jump;
        sum_sq += jump * jump;
    }
    let n = trials as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(MonteCarloEstimate {
        mean,
        standard_error: (var / n).sqrt(),
        trials,
    })
}

#[derive(Clone, Debug)]
pub struct NumericOptimum {
    pub weights: SelectionWeights,
    pub objective: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
}

const GRADIENT_TOLERANCE: f64 = 1e-10;
const MAX_DESCENT_ITERATIONS: usize = 200_000;

fn softmax(theta: &[f64]) -> Vec<f64> {
    let top = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = theta.iter().map(|t| (t - top).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Objective and its gradient in the softmax parameters:
/// `df/dtheta_j = q_j f - d_j / q_j`.
fn objective_and_gradient(theta: &[f64], d: &[f64]) -> (f64, Vec<f64>) {
    let q = softmax(theta);
    let f: f64 = d.iter().zip(&q).map(|(di, qi)| di / qi).sum();
    let g = d.iter().zip(&q).map(|(di, qi)| qi * f - di / qi).collect();
    (f, g)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Minimise `sum_i d_i / q_i` over the open simplex by gradient descent on
/// softmax parameters, starting from uniform weights. Steps use the
/// Barzilai-Borwein length with Armijo backtracking.
pub fn optimal_weights_numeric(d: &[f64]) -> Result<NumericOptimum> {
    if d.is_empty() {
        return Err(Error::InvalidArgument("no variables".into()));
    }
    if let Some(bad) = d.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "d entries must be positive, got {bad}"
        )));
    }
    let mut theta = vec![0.0; d.len()];
    let (mut f, mut g) = objective_and_gradient(&theta, d);
    let mut step = 1.0 / f.max(1.0);
    let mut iterations = 0;
    while norm(&g) > GRADIENT_TOLERANCE && iterations < MAX_DESCENT_ITERATIONS {
        iterations += 1;
        let gg: f64 = g.iter().map(|x| x * x).sum();
        let mut t = step;
        let (next_theta, next_f, next_g) = loop {
            let cand: Vec<f64> = theta.iter().zip(&g).map(|(th, gi)| th - t * gi).collect();
            let (cf, cg) = objective_and_gradient(&cand, d);
            if cf <= f - 1e-4 * t * gg || t < 1e-300 {
                break (cand, cf, cg);
            }
            t *= 0.5;
        };
        let s: Vec<f64> = next_theta.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|x| x * x).sum();
        step = if sy > 0.0 { ss / sy } else { t * 2.0 };
        if ss == 0.0 {
            // Rounding has stalled progress; the current point is as good as it gets.
            theta = next_theta;
            f = next_f;
            g = next_g;
            break;
        }
        theta = next_theta;
        f = next_f;
        g = next_g;
    }
    let mut q = softmax(&theta);
    let residue = 1.0 - q.iter().sum::<f64>();
    let largest = (0..q.len()).max_by(|&a, &b| q[a].total_cmp(&q[b])).unwrap();
    q[largest] += residue;
    Ok(NumericOptimum {
        objective: f,
        gradient_norm: norm(&g),
        iterations,
        weights: SelectionWeights::new(q)?,
    })
}
