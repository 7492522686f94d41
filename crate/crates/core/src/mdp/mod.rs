//! Core MDP types: transitions, offline datasets, policies and rollouts.

mod dataset;
mod empirical;
mod policy;
mod returns;

pub use dataset::{DatasetMeta, OfflineDataset, TransitionTuple};
pub use empirical::EmpiricalDistribution;
pub use policy::Policy;
pub use returns::{
    conditional_returns, monte_carlo_returns, truncation_length, Environment, DEFAULT_TRUNCATION_TOL,
};

use serde::{Deserialize, Serialize};

/// Index of a discrete action, `0 <= index < A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionId(pub usize);

impl ActionId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Episode structure of an MDP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Horizon {
    Finite { steps: usize },
    Discounted { gamma: f64 },
}

impl Horizon {
    pub fn steps(&self) -> Option<usize> {
        match *self {
            Horizon::Finite { steps } => Some(steps),
            Horizon::Discounted { .. } => None,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            Horizon::Finite { .. } => None,
            Horizon::Discounted { gamma } => Some(gamma),
        }
    }
}
