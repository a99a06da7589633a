use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::engine::GibbsModel;
use crate::error::{Error, Result};

/// Posterior over binary images under an Ising prior and Gaussian pixel noise:
///
/// ```text
/// p(X | Y) ∝ exp( J * sum_{edges} x_i x_j  -  sum_i (y_i - x_i)^2 / (2 sigma^2) )
/// ```
///
/// on a 4-neighbour grid. Each edge enters the sum once.
#[derive(Clone, Debug)]
pub struct IsingDenoiseTarget {
    height: usize,
    width: usize,
    observed: Vec<f64>,
    pub coupling: f64,
    pub sigma: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl IsingDenoiseTarget {
    pub const DEFAULT_COUPLING: f64 = 1.0;

    pub fn new(
        height: usize,
        width: usize,
        observed: Vec<f64>,
        coupling: f64,
        sigma: f64,
    ) -> Result<Self> {
        if height == 0 || width == 0 || observed.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} observations for a {height}x{width} grid",
                observed.len()
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self {
            height,
            width,
            observed,
            coupling,
            sigma,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    fn neighbour_sum(&self, spins: &[i8], index: usize) -> i32 {
        let (r, c) = (index / self.width, index % self.width);
        let mut s = 0i32;
        if r > 0 {
            s += spins[index - self.width] as i32;
        }
        if r + 1 < self.height {
            s += spins[index + self.width] as i32;
        }
        if c > 0 {
            s += spins[index - 1] as i32;
        }
        if c + 1 < self.width {
            s += spins[index + 1] as i32;
        }
        s
    }

    /// `P(x_i = +1 | rest) = sigmoid(2 J sum_{j~i} x_j + 2 y_i / sigma^2)`.
    pub fn prob_up(&self, spins: &[i8], index: usize) -> f64 {
        let field = 2.0 * self.coupling * self.neighbour_sum(spins, index) as f64
            + 2.0 * self.observed[index] / (self.sigma * self.sigma);
        sigmoid(field)
    }

    pub fn conditional_sample<R: Rng + ?Sized>(
        &self,
        spins: &[i8],
        index: usize,
        rng: &mut R,
    ) -> i8 {
        if rng.gen::<f64>() < self.prob_up(spins, index) {
            1
        } else {
            -1
        }
    }

    pub fn log_density(&self, spins: &[i8]) -> f64 {
        let mut pair = 0.0;
        for r in 0..self.height {
            for c in 0..self.width {
                let i = r * self.width + c;
                if c + 1 < self.width {
                    pair += (spins[i] * spins[i + 1]) as f64;
                }
                if r + 1 < self.height {
                    pair += (spins[i] * spins[i + self.width]) as f64;
                }
            }
        }
        let fit: f64 = spins
            .iter()
            .zip(&self.observed)
            .map(|(&x, y)| (y - x as f64).powi(2))
            .sum();
        self.coupling * pair - fit / (2.0 * self.sigma * self.sigma)
    }

    /// Per-pixel threshold of the observation: `+1` where `y_i >= 0`.
    pub fn sign_of_observed(&self) -> Vec<i8> {
        self.observed
            .iter()
            .map(|&y| if y >= 0.0 { 1 } else { -1 })
            .collect()
    }
}

impl GibbsModel for IsingDenoiseTarget {
    type State = Vec<i8>;

    fn dimension(&self) -> usize {
        self.height * self.width
    }

    fn update<R: Rng + ?Sized>(&self, state: &mut Vec<i8>, index: usize, rng: &mut R) {
        state[index] = self.conditional_sample(state, index, rng);
    }

    fn scalar_summary(&self, state: &Vec<i8>, index: usize) -> f64 {
        state[index] as f64
    }

    fn record(&self, state: &Vec<i8>, out: &mut Vec<f64>) {
        out.extend(state.iter().map(|&s| s as f64));
    }

    fn unnormalized_log_density(&self, state: &Vec<i8>) -> Option<f64> {
        Some(self.log_density(state))
    }
}

/// `Y = X + N(0, sigma^2)` elementwise.
pub fn corrupt_image<R: Rng + ?Sized>(spins: &[i8], sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    if spins.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::InvalidArgument("spins must be -1 or +1".into()));
    }
    if sigma == 0.0 {
        return Ok(spins.iter().map(|&s| s as f64).collect());
    }
    let noise = Normal::new(0.0, sigma)
        .map_err(|e| Error::InvalidArgument(format!("sigma {sigma}: {e}")))?;
    Ok(spins
        .iter()
        .map(|&s| s as f64 + noise.sample(rng))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn isolated_pixel_with_zero_observation_is_fair() {
        let t = IsingDenoiseTarget::new(1, 1, vec![0.0], 5.0, 1.0).unwrap();
        assert_eq!(t.prob_up(&[1], 0), 0.5);
    }

    #[test]
    fn strong_observation_dominates() {
        let t = IsingDenoiseTarget::new(1, 3, vec![0.0, 1e6, 0.0], 1.0, 1.0).unwrap();
        assert!(t.prob_up(&[-1, -1, -1], 1) > 1.0 - 1e-12);
        let t = IsingDenoiseTarget::new(1, 3, vec![0.0, -1e6, 0.0], 1.0, 1.0).unwrap();
        assert!(t.prob_up(&[1, 1, 1], 1) < 1e-12);
    }

    #[test]
    fn conditional_is_ratio_of_log_density() {
        let y = vec![0.3, -1.2, 0.8, 0.1, -0.4, 2.0];
        let t = IsingDenoiseTarget::new(2, 3, y, 0.7, 0.9).unwrap();
        let state = vec![1, -1, -1, 1, 1, -1];
        for i in 0..6 {
            let mut up = state.clone();
            up[i] = 1;
            let mut down = state.clone();
            down[i] = -1;
            let expected = sigmoid(t.log_density(&up) - t.log_density(&down));
            assert!((t.prob_up(&state, i) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn corrupt_zero_sigma_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = vec![1, -1, 1, 1];
        assert_eq!(
            corrupt_image(&x, 0.0, &mut rng).unwrap(),
            vec![1.0, -1.0, 1.0, 1.0]
        );
        assert!(corrupt_image(&[0, 1], 1.0, &mut rng).is_err());
    }

    // The mean of 1e4 N(0, sigma^2) residuals has standard deviation sigma / 100.
    #[test]
    fn corruption_noise_is_centred() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<i8> = (0..10_000)
            .map(|i| if i % 3 == 0 { 1 } else { -1 })
            .collect();
        let sigma = 1.0;
        let y = corrupt_image(&x, sigma, &mut rng).unwrap();
        let mean: f64 = y.iter().zip(&x).map(|(a, &b)| a - b as f64).sum::<f64>() / 1e4;
        assert!(mean.abs() <= 3.0 * sigma / 100.0, "{mean}");
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(IsingDenoiseTarget::new(2, 2, vec![0.0; 3], 1.0, 1.0).is_err());
        assert!(IsingDenoiseTarget::new(2, 2, vec![0.0; 4], 1.0, 0.0).is_err());
    }
}
