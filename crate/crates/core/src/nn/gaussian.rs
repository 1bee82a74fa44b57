use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::setnet::{NetSpec, SetBatch, SetNet, SetNetCache};
use super::{NnError, Params};
use crate::geom::Vec2;
use crate::sim::Observation;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Diagonal Gaussian over 2D velocity commands with an observation-dependent
/// mean and a learned, observation-independent standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub mean: SetNet,
    pub log_std: [f64; 2],
}

impl GaussianPolicy {
    pub fn init<R: Rng + ?Sized>(spec: &NetSpec, init_std: f64, rng: &mut R) -> Self {
        Self {
            mean: SetNet::init(spec, rng),
            log_std: [init_std.ln(); 2],
        }
    }

    pub fn std(&self) -> [f64; 2] {
        [self.log_std[0].exp(), self.log_std[1].exp()]
    }

    pub fn mean_action(&self, obs: &Observation) -> Result<Vec2, NnError> {
        let m = self.mean.forward(obs)?;
        Ok(Vec2::new(m[0], m[1]))
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, obs: &Observation, rng: &mut R) -> Result<(Vec2, f64), NnError> {
        let mean = self.mean_action(obs)?;
        Ok(self.sample_around(mean, rng))
    }

    /// Draws `mean + std * eps` and returns it with its log-density.
    pub fn sample_around<R: Rng + ?Sized>(&self, mean: Vec2, rng: &mut R) -> (Vec2, f64) {
        let s = self.std();
        let ex: f64 = rng.sample(StandardNormal);
        let ey: f64 = rng.sample(StandardNormal);
        let a = Vec2::new(mean.x + s[0] * ex, mean.y + s[1] * ey);
        (a, self.log_prob(mean, a))
    }

    pub fn log_prob(&self, mean: Vec2, action: Vec2) -> f64 {
        log_prob(&[mean.x, mean.y], &self.log_std, &[action.x, action.y])
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.log_std)
    }

    pub fn forward_train(&self, batch: &SetBatch) -> Result<(Array2<f64>, SetNetCache), NnError> {
        self.mean.forward_train(batch)
    }

    /// Accumulates the gradient of `sum_i weights[i] * log pi(actions[i] | o_i)`
    /// given the means recorded by [`forward_train`](Self::forward_train).
    pub fn backward_log_prob(
        &self,
        cache: &SetNetCache,
        means: &Array2<f64>,
        actions: &[Vec2],
        weights: &[f64],
        grad: &mut GaussianPolicy,
    ) {
        let inv_var = [(-2.0 * self.log_std[0]).exp(), (-2.0 * self.log_std[1]).exp()];
        let mut d_mean = Array2::zeros(means.raw_dim());
        for (i, (a, w)) in actions.iter().zip(weights).enumerate() {
            let diff = [a.x - means[[i, 0]], a.y - means[[i, 1]]];
            for k in 0..2 {
                d_mean[[i, k]] = w * diff[k] * inv_var[k];
                grad.log_std[k] += w * (diff[k] * diff[k] * inv_var[k] - 1.0);
            }
        }
        self.mean.backward(cache, d_mean, &mut grad.mean);
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            mean: self.mean.zeros_like(),
            log_std: [0.0; 2],
        }
    }
}

/// Log-density of independent normals.
pub fn log_prob(mean: &[f64], log_std: &[f64], x: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(x)
        .map(|((m, ls), x)| {
            let z = (x - m) * (-ls).exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

/// Differential entropy of independent normals: `sum_k 0.5 ln(2 pi e sigma_k^2)`.
pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 * (1.0 + (2.0 * PI).ln())).sum()
}

impl Params for GaussianPolicy {
    fn slices(&self) -> Vec<&[f64]> {
        let mut v = self.mean.slices();
        v.push(&self.log_std);
        v
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.mean.slices_mut();
        v.push(&mut self.log_std);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use std::f64::consts::LN_2;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn log_prob_closed_forms() {
        let ln2pi = (2.0 * PI).ln();
        assert_abs_diff_eq!(log_prob(&[0.3, -1.0], &[0.0, 0.0], &[0.3, -1.0]), -ln2pi, epsilon = 1e-14);
        assert_abs_diff_eq!(log_prob(&[0.3, -1.0], &[0.0, 0.0], &[1.3, -1.0]), -ln2pi - 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(-ln2pi, -1.8379, epsilon = 1e-4);
    }

    #[test]
    fn entropy_closed_forms() {
        assert_abs_diff_eq!(entropy(&[0.0, 0.0]), 2.8379, epsilon = 1e-4);
        assert_abs_diff_eq!(entropy(&[1.0, 1.0]), 4.8379, epsilon = 1e-4);
        let base = entropy(&[-0.7, 0.2]);
        let doubled = entropy(&[-0.7 + LN_2, 0.2 + LN_2]);
        assert_abs_diff_eq!(doubled - base, 2.0 * LN_2, epsilon = 1e-14);
    }

    #[test]
    fn sample_mean_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let policy = GaussianPolicy::init(&NetSpec::policy(true), 0.5, &mut rng);
        let mu = Vec2::new(0.7, -0.2);
        let n = 100_000;
        let mut acc = Vec2::ZERO;
        for _ in 0..n {
            acc += policy.sample_around(mu, &mut rng).0;
        }
        let mean = acc / n as f64;
        let bound = 4.0 * 0.5 / (n as f64).sqrt();
        assert!((mean.x - mu.x).abs() < bound && (mean.y - mu.y).abs() < bound);
    }
}
