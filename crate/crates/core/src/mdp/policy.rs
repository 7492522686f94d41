use super::ActionId;
use crate::models::FeatureMap;
use crate::{Error, Result, RngStream, Scalar};

const PROB_TOL: f64 = 1e-9;

/// Stochastic policy over a finite action set, tabulated per feature cell.
#[derive(Debug, Clone)]
pub struct Policy<S> {
    feature: FeatureMap,
    probs: Vec<Vec<S>>,
}

impl<S: Scalar> Policy<S> {
    /// `probs[cell][a]`; every row must be a probability vector.
    pub fn tabular(feature: FeatureMap, probs: Vec<Vec<S>>) -> Result<Self> {
        if probs.len() != feature.num_cells() {
            return Err(Error::DimensionMismatch { expected: feature.num_cells(), got: probs.len() });
        }
        let num_actions = probs.first().map_or(0, Vec::len);
        if num_actions == 0 {
            return Err(Error::InvalidArgument("policy needs at least one action".into()));
        }
        for (c, row) in probs.iter().enumerate() {
            if row.len() != num_actions {
                return Err(Error::DimensionMismatch { expected: num_actions, got: row.len() });
            }
            let sum = row.iter().fold(S::zero(), |a, &b| a + b);
            if row.iter().any(|&p| p < S::zero()) || (sum - S::one()).abs() > S::lit(PROB_TOL) {
                return Err(Error::Validation(format!("policy row for cell {c} is not a probability vector")));
            }
        }
        Ok(Self { feature, probs })
    }

    pub fn deterministic(feature: FeatureMap, actions: &[usize], num_actions: usize) -> Result<Self> {
        let probs = actions
            .iter()
            .map(|&a| (0..num_actions).map(|b| if a == b { S::one() } else { S::zero() }).collect())
            .collect();
        Self::tabular(feature, probs)
    }

    pub fn uniform(feature: FeatureMap, num_actions: usize) -> Result<Self> {
        let p = S::one() / S::from_usize_lossy(num_actions);
        Self::tabular(feature, vec![vec![p; num_actions]; feature.num_cells()])
    }

    /// With probability `epsilon` act uniformly over all actions, otherwise take `greedy[cell]`.
    pub fn epsilon_greedy(feature: FeatureMap, greedy: &[usize], epsilon: S, num_actions: usize) -> Result<Self> {
        if !(S::zero()..=S::one()).contains(&epsilon) {
            return Err(Error::InvalidArgument(format!("epsilon {epsilon} outside [0, 1]")));
        }
        let explore = epsilon / S::from_usize_lossy(num_actions);
        let probs = greedy
            .iter()
            .map(|&g| {
                (0..num_actions)
                    .map(|a| if a == g { S::one() - epsilon + explore } else { explore })
                    .collect()
            })
            .collect();
        Self::tabular(feature, probs)
    }

    pub fn num_actions(&self) -> usize {
        self.probs[0].len()
    }

    pub fn feature(&self) -> &FeatureMap {
        &self.feature
    }

    pub fn probs(&self, x: &[S]) -> &[S] {
        &self.probs[self.feature.cell(x)]
    }

    pub fn probs_for_cell(&self, cell: usize) -> &[S] {
        &self.probs[cell]
    }

    pub fn sample(&self, x: &[S], rng: &mut RngStream) -> ActionId {
        ActionId(rng.categorical(self.probs(x)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn epsilon_greedy_optimal_probability() {
        let p = Policy::<f64>::epsilon_greedy(FeatureMap::Constant, &[0], 1.0 / 7.0, 2).unwrap();
        assert!((p.probs(&[0.0])[0] - 13.0 / 14.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        assert!(Policy::<f64>::tabular(FeatureMap::Constant, vec![vec![0.5, 0.4]]).is_err());
        assert!(Policy::<f64>::tabular(FeatureMap::Constant, vec![vec![1.5, -0.5]]).is_err());
    }

    proptest! {
        #[test]
        fn rows_sum_to_one(eps in 0.0f64..=1.0, na in 1usize..6, g in 0usize..6) {
            let g = g % na;
            let p = Policy::<f64>::epsilon_greedy(FeatureMap::OneHot { size: 3 }, &[g, 0, na - 1], eps, na).unwrap();
            for x in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
                let s: f64 = p.probs(&x).iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }
}
