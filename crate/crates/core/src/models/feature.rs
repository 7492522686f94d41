use serde::{Deserialize, Serialize};

use crate::Scalar;

/// Deterministic map from an observation to a discrete conditioning cell.
///
/// Every conditional model keeps one parameter set per `(cell, action)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeatureMap {
    /// Reads the latent and step one-hot blocks of a combination-lock observation;
    /// cell `(h - 1) * 2 + latent`.
    CombinationLock { horizon: usize },
    /// Arg-max of the first `size` coordinates.
    OneHot { size: usize },
    /// Single cell.
    Constant,
}

impl FeatureMap {
    pub fn num_cells(&self) -> usize {
        match *self {
            FeatureMap::CombinationLock { horizon } => 2 * horizon,
            FeatureMap::OneHot { size } => size,
            FeatureMap::Constant => 1,
        }
    }

    pub fn cell<S: Scalar>(&self, x: &[S]) -> usize {
        match *self {
            FeatureMap::CombinationLock { horizon } => {
                let latent = argmax(&x[..2]);
                let step = argmax(&x[2..2 + horizon]);
                step * 2 + latent
            }
            FeatureMap::OneHot { size } => argmax(&x[..size]),
            FeatureMap::Constant => 0,
        }
    }

    pub fn id(&self) -> String {
        match *self {
            FeatureMap::CombinationLock { horizon } => format!("combination-lock-h{horizon}"),
            FeatureMap::OneHot { size } => format!("one-hot-{size}"),
            FeatureMap::Constant => "constant".into(),
        }
    }
}

fn argmax<S: Scalar>(v: &[S]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::CombinationLock;
    use crate::RngStream;

    #[test]
    fn reads_comb_lock_blocks_through_noise() {
        let env = CombinationLock::scalar_default();
        let f = env.feature_map();
        let mut rng = RngStream::new(0);
        for h in 1..=20 {
            for w in 0..2 {
                let x: Vec<f64> = env.observe_with_noise(w, h, &mut rng);
                assert_eq!(f.cell(&x), (h - 1) * 2 + w);
            }
        }
        assert_eq!(f.num_cells(), 40);
    }

    #[test]
    fn one_hot_and_constant() {
        assert_eq!(FeatureMap::OneHot { size: 3 }.cell(&[0.0, 0.0, 1.0]), 2);
        assert_eq!(FeatureMap::Constant.cell::<f64>(&[]), 0);
    }
}
