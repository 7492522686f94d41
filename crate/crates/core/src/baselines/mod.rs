//! Distributional TD baselines trained on the same offline data and the same
//! conditioning cells as FLE, plus classic least-squares FQE.

mod categorical_td;
mod fqe;
mod quantile_td;

pub use categorical_td::{categorical_td_run, CategoricalTdConfig};
pub use fqe::{fqe_least_squares, FqeResult};
pub use quantile_td::{quantile_huber_objective, quantile_midpoints, quantile_td_run, QuantileTdConfig};

use crate::fle::SplitMode;
use crate::mdp::{OfflineDataset, Policy};
use crate::{Error, Result, RngStream, Scalar};

pub(crate) fn step_subsets<S: Scalar>(
    dataset: &OfflineDataset<S>,
    horizon: usize,
    split: SplitMode,
    policy: &Policy<S>,
    rng: &RngStream,
) -> Result<Vec<OfflineDataset<S>>> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    if policy.num_actions() != dataset.meta().num_actions {
        return Err(Error::DimensionMismatch { expected: dataset.meta().num_actions, got: policy.num_actions() });
    }
    match split {
        SplitMode::ByStep => dataset.split_by_step(horizon),
        SplitMode::Random => dataset.split(horizon, &mut rng.derive("split")),
    }
}
