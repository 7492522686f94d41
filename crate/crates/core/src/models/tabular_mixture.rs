use serde::{Deserialize, Serialize};

use super::{check_groups, floor_log, group_of, maximize, ConditionalDensity, FeatureMap, OptimizerConfig};
use crate::scalar::softmax_into;
use crate::env::RewardDensity;
use crate::mdp::ActionId;
use crate::{Error, Result, RngStream, Scalar};

const ROW_TOL: f64 = 1e-6;

/// Mixture over a fixed dictionary of scalar reward laws, with free weights per
/// `(cell, action)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMixtureModel<S> {
    feature: FeatureMap,
    num_actions: usize,
    dictionary: Vec<RewardDensity>,
    weights: Vec<Vec<S>>,
}

impl<S: Scalar> TabularMixtureModel<S> {
    pub fn new(feature: FeatureMap, num_actions: usize, dictionary: Vec<RewardDensity>, weights: Vec<Vec<S>>) -> Result<Self> {
        check_groups(&feature, num_actions, &weights)?;
        for row in &weights {
            if row.len() != dictionary.len() {
                return Err(Error::DimensionMismatch { expected: dictionary.len(), got: row.len() });
            }
            let s = row.iter().fold(S::zero(), |a, &b| a + b).as_f64();
            if row.iter().any(|&w| w < S::zero()) || (s - 1.0).abs() > ROW_TOL {
                return Err(Error::Validation(format!("mixture weights must be a probability vector (sum {s})")));
            }
        }
        Ok(Self { feature, num_actions, dictionary, weights })
    }

    pub fn dictionary(&self) -> &[RewardDensity] {
        &self.dictionary
    }

    pub fn weights(&self, x: &[S], a: ActionId) -> &[S] {
        &self.weights[group_of(&self.feature, self.num_actions, x, a)]
    }

    pub fn group_weights(&self) -> &[Vec<S>] {
        &self.weights
    }

    pub fn pdf(&self, x: &[S], a: ActionId, z: S) -> S {
        mixture_pdf(&self.dictionary, self.weights(x, a), z)
    }
}

pub fn mixture_pdf<S: Scalar>(dictionary: &[RewardDensity], w: &[S], z: S) -> S {
    dictionary.iter().zip(w).fold(S::zero(), |acc, (d, &w)| acc + w * d.pdf(z))
}

impl<S: Scalar> ConditionalDensity<S> for TabularMixtureModel<S> {
    fn reward_dim(&self) -> usize {
        1
    }

    fn sample_into(&self, x: &[S], a: ActionId, rng: &mut RngStream, out: &mut [S]) {
        let j = rng.categorical(self.weights(x, a));
        out[0] = self.dictionary[j].sample(rng);
    }

    fn log_density(&self, x: &[S], a: ActionId, z: &[S]) -> S {
        floor_log(self.pdf(x, a, z[0]).ln())
    }
}

/// Gradient ascent on softmax logits of the mixing weights (dictionary fixed).
pub(super) fn fit_group<S: Scalar>(
    dictionary: &[RewardDensity],
    data: &[S],
    cfg: &OptimizerConfig,
) -> Result<(Vec<S>, (f64, f64))> {
    let k = dictionary.len();
    let mut logits = vec![S::zero(); k];
    let n = data.len();
    if n == 0 {
        return Ok((vec![S::from_usize_lossy(k).recip(); k], (0.0, 0.0)));
    }
    let dens: Vec<S> = data.iter().flat_map(|&z| dictionary.iter().map(move |d| d.pdf(z))).collect();
    let tiny = S::min_positive_value();
    let nn = S::from_usize_lossy(n);
    let mut w = vec![S::zero(); k];
    let r = maximize(&mut logits, cfg, |l, g| {
        softmax_into(l, &mut w);
        g.iter_mut().for_each(|v| *v = S::zero());
        let mut total = S::zero();
        for row in dens.chunks_exact(k) {
            let mix = row.iter().zip(&w).fold(S::zero(), |a, (&p, &w)| a + p * w);
            total += mix.max(tiny).ln();
            if mix <= S::zero() {
                continue;
            }
            for j in 0..k {
                g[j] += w[j] * row[j] / mix;
            }
        }
        for j in 0..k {
            g[j] = (g[j] - nn * w[j]) / nn;
        }
        total / nn
    })?;
    softmax_into(&logits, &mut w);
    Ok((w, (r.initial.as_f64() * n as f64, r.final_value.as_f64() * n as f64)))
}
