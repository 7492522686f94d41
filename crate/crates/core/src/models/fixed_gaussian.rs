use serde::{Deserialize, Serialize};

use super::{check_groups, floor_log, group_of, maximize, ConditionalDensity, FeatureMap, OptimizerConfig};
use crate::mdp::ActionId;
use crate::{Result, RngStream, Scalar};

/// Isotropic Gaussian with a known, fixed standard deviation and a free mean
/// per `(cell, action)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedGaussianModel<S> {
    feature: FeatureMap,
    num_actions: usize,
    dim: usize,
    sigma: S,
    means: Vec<Vec<S>>,
}

impl<S: Scalar> FixedGaussianModel<S> {
    pub fn new(feature: FeatureMap, num_actions: usize, dim: usize, sigma: S, means: Vec<Vec<S>>) -> Result<Self> {
        check_groups(&feature, num_actions, &means)?;
        Ok(Self { feature, num_actions, dim, sigma, means })
    }

    pub fn sigma(&self) -> S {
        self.sigma
    }

    pub fn mean(&self, x: &[S], a: ActionId) -> &[S] {
        &self.means[group_of(&self.feature, self.num_actions, x, a)]
    }

    pub fn group_means(&self) -> &[Vec<S>] {
        &self.means
    }
}

fn log_lik<S: Scalar>(z: &[S], mean: &[S], sigma: S) -> S {
    let d = S::from_usize_lossy(z.len());
    let sq = z.iter().zip(mean).fold(S::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
    -S::lit(0.5) * sq / (sigma * sigma) - d * (sigma.ln() + S::lit(0.5 * (2.0 * std::f64::consts::PI).ln()))
}

impl<S: Scalar> ConditionalDensity<S> for FixedGaussianModel<S> {
    fn reward_dim(&self) -> usize {
        self.dim
    }

    fn sample_into(&self, x: &[S], a: ActionId, rng: &mut RngStream, out: &mut [S]) {
        let m = self.mean(x, a);
        for j in 0..self.dim {
            out[j] = m[j] + self.sigma * S::standard_normal(rng);
        }
    }

    fn log_density(&self, x: &[S], a: ActionId, z: &[S]) -> S {
        floor_log(log_lik(z, self.mean(x, a), self.sigma))
    }
}

pub(super) fn fit_group<S: Scalar>(data: &[S], d: usize, sigma: S, cfg: &OptimizerConfig) -> Result<(Vec<S>, (f64, f64))> {
    let mut mean = vec![S::zero(); d];
    let n = data.len() / d;
    if n == 0 {
        return Ok((mean, (0.0, 0.0)));
    }
    let nn = S::from_usize_lossy(n);
    let inv_var = (sigma * sigma).recip();
    let r = maximize(&mut mean, cfg, |m, g| {
        g.iter_mut().for_each(|v| *v = S::zero());
        let mut total = S::zero();
        for z in data.chunks_exact(d) {
            total += log_lik(z, m, sigma);
            for j in 0..d {
                g[j] += (z[j] - m[j]) * inv_var / nn;
            }
        }
        total / nn
    })?;
    Ok((mean, (r.initial.as_f64() * n as f64, r.final_value.as_f64() * n as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelSpec, RegressionTargets};

    #[test]
    fn one_step_at_variance_learning_rate_reaches_sample_mean() {
        let sigma = 0.5;
        let mut t = RegressionTargets::<f64>::new(1, 2);
        for z in &[[1.0, 2.0], [3.0, -2.0], [2.0, 3.0]] {
            t.push(&[0.0], ActionId(0), z).unwrap();
        }
        let spec = ModelSpec::FixedGaussian { sigma, optimizer: OptimizerConfig::gradient(sigma * sigma, 1) };
        let out = spec.fit(FeatureMap::Constant, 1, &t, &RngStream::new(0)).unwrap();
        let crate::models::FittedModel::FixedGaussian(m) = &out.model else { unreachable!() };
        let mu = m.mean(&[0.0], ActionId(0));
        assert!((mu[0] - 2.0).abs() < 1e-12 && (mu[1] - 1.0).abs() < 1e-12);
    }
}
