use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::engine::GibbsModel;
use crate::error::{Error, Result};

/// Parameters of `Sigma = lambda_cov * I + epsilon * Y Y^T`, kept for provenance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceParams {
    pub d: usize,
    pub r: usize,
    pub epsilon: f64,
    pub lambda_cov: f64,
}

/// Multivariate normal target sampled coordinate-wise through its precision matrix.
#[derive(Clone, Debug)]
pub struct GaussianTarget {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
    cholesky_l: DMatrix<f64>,
    /// `1 / Lambda_ii`.
    conditional_variance: Vec<f64>,
    /// `-Lambda_ij / Lambda_ii` for `j != i`, zero on the diagonal; row `i`.
    regression: Vec<f64>,
    pub params: Option<CovarianceParams>,
}

const SYMMETRY_TOLERANCE: f64 = 1e-12;

impl GaussianTarget {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::ShapeMismatch(format!(
                "mean has length {d}, covariance is {}x{}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > SYMMETRY_TOLERANCE * covariance.amax().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "covariance is not symmetric (max asymmetry {asym})"
            )));
        }
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("covariance is not positive definite".into()))?;
        let cholesky_l = chol.l();
        let mut precision = chol.inverse();
        precision = (&precision + precision.transpose()) * 0.5;
        let conditional_variance: Vec<f64> = (0..d).map(|i| 1.0 / precision[(i, i)]).collect();
        let mut regression = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    regression[i * d + j] = -precision[(i, j)] * conditional_variance[i];
                }
            }
        }
        Ok(Self {
            mean,
            covariance,
            precision,
            cholesky_l,
            conditional_variance,
            regression,
            params: None,
        })
    }

    /// Zero-mean target with independent coordinates.
    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        let v = DVector::from_column_slice(variances);
        Self::new(DVector::zeros(variances.len()), DMatrix::from_diagonal(&v))
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// Mean and variance of coordinate `index` given the rest of `state`.
    pub fn conditional_moments(&self, state: &[f64], index: usize) -> (f64, f64) {
        let d = self.dimension();
        let row = &self.regression[index * d..(index + 1) * d];
        let shift: f64 = row
            .iter()
            .zip(state)
            .zip(self.mean.iter())
            .map(|((b, x), m)| b * (x - m))
            .sum();
        (self.mean[index] + shift, self.conditional_variance[index])
    }

    /// Draw coordinate `index` from its full conditional.
    pub fn conditional_sample<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        index: usize,
        rng: &mut R,
    ) -> f64 {
        let (m, v) = self.conditional_moments(state, index);
        let z: f64 = StandardNormal.sample(rng);
        m + v.sqrt() * z
    }

    /// One exact joint draw, `mu + L z`.
    pub fn sample_direct<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: DVector<f64> = DVector::from_fn(self.dimension(), |_, _| StandardNormal.sample(rng));
        (&self.mean + &self.cholesky_l * z)
            .iter()
            .copied()
            .collect()
    }

    pub fn marginal_variances(&self) -> Vec<f64> {
        self.covariance.diagonal().iter().copied().collect()
    }
}

/// `Sigma = lambda_cov I + epsilon Y Y^T` with `Y` a `d x r` standard normal
/// matrix, zero mean.
pub fn make_covariance<R: Rng + ?Sized>(
    d: usize,
    r: usize,
    epsilon: f64,
    lambda_cov: f64,
    rng: &mut R,
) -> Result<GaussianTarget> {
    if d == 0 || r == 0 {
        return Err(Error::InvalidArgument("d and r must be positive".into()));
    }
    if !(lambda_cov > 0.0) || !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need lambda_cov > 0 and epsilon >= 0, got {lambda_cov} and {epsilon}"
        )));
    }
    let y: DMatrix<f64> = DMatrix::from_fn(d, r, |_, _| StandardNormal.sample(rng));
    let mut sigma: DMatrix<f64> = &y * y.transpose() * epsilon;
    for i in 0..d {
        sigma[(i, i)] += lambda_cov;
    }
    sigma = (&sigma + sigma.transpose()) * 0.5;
    let mut target = GaussianTarget::new(DVector::zeros(d), sigma)?;
    target.params = Some(CovarianceParams {
        d,
        r,
        epsilon,
        lambda_cov,
    });
    Ok(target)
}

impl GibbsModel for GaussianTarget {
    type State = Vec<f64>;

    fn dimension(&self) -> usize {
        self.mean.len()
    }

    fn update<R: Rng + ?Sized>(&self, state: &mut Vec<f64>, index: usize, rng: &mut R) {
        state[index] = self.conditional_sample(state, index, rng);
    }

    fn scalar_summary(&self, state: &Vec<f64>, index: usize) -> f64 {
        state[index]
    }

    fn record(&self, state: &Vec<f64>, out: &mut Vec<f64>) {
        out.extend_from_slice(state);
    }

    fn unnormalized_log_density(&self, state: &Vec<f64>) -> Option<f64> {
        let diff = DVector::from_column_slice(state) - &self.mean;
        Some(-0.5 * diff.dot(&(&self.precision * &diff)))
    }
}
