//! Benchmark environments with exact return-distribution oracles.

mod comb_lock;
mod lqr;
mod tabular;

pub use comb_lock::{CombinationLock, RewardMode, COMB_LOCK_OBS_DIM};
pub use lqr::{LqrSystem, Matrix};
pub use tabular::{MixtureWeights, RewardDensity, TabularMdp};
