//! Distributional off-policy evaluation with fitted likelihood estimation.
//!
//! Every numeric routine is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the bottom pin the common `f64` instantiation.

// `!(x > 0.0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod env;
mod error;
pub mod mdp;
pub mod metrics;
pub mod fle;
pub mod harness;
pub mod models;
pub mod theory;
mod rng;
mod scalar;

pub use error::{Error, Result};
pub use rng::{derive_seed, RngStream};
pub use scalar::{log_sum_exp, mean, softmax_into, Scalar};

pub type Dataset = mdp::OfflineDataset<f64>;
pub type Targets = models::RegressionTargets<f64>;
pub type Model = models::FittedModel<f64>;
