//! Monotone-accept gradient ascent.
//!
//! Each iteration proposes a step along the ascent direction and halves it until
//! the objective does not decrease, so the returned parameters never score below
//! the starting point.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// Raw gradient direction.
    Gradient,
    /// Adam moment-scaled direction.
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub rule: StepRule,
    pub learning_rate: f64,
    pub iterations: usize,
    #[serde(default = "default_halvings")]
    pub max_halvings: u32,
    /// Relative improvement below which an iteration counts as stalled.
    #[serde(default)]
    pub tolerance: f64,
    /// Stop after this many consecutive stalled iterations; 0 disables.
    #[serde(default)]
    pub patience: usize,
}

fn default_halvings() -> u32 {
    20
}

impl OptimizerConfig {
    pub fn adam(learning_rate: f64, iterations: usize) -> Self {
        Self { rule: StepRule::Adam, learning_rate, iterations, max_halvings: 20, tolerance: 0.0, patience: 0 }
    }

    pub fn gradient(learning_rate: f64, iterations: usize) -> Self {
        Self { rule: StepRule::Gradient, learning_rate, iterations, max_halvings: 20, tolerance: 0.0, patience: 0 }
    }

    pub fn with_early_stop(mut self, tolerance: f64, patience: usize) -> Self {
        self.tolerance = tolerance;
        self.patience = patience;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeReport<S> {
    pub initial: S,
    pub final_value: S,
    pub iterations: usize,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Maximize `objective` in place. The closure returns the value at `params`
/// and writes the gradient into its second argument.
pub fn maximize<S, F>(params: &mut Vec<S>, cfg: &OptimizerConfig, mut objective: F) -> Result<OptimizeReport<S>>
where
    S: Scalar,
    F: FnMut(&[S], &mut [S]) -> S,
{
    cfg.validate()?;
    let n = params.len();
    let mut grad = vec![S::zero(); n];
    let mut value = objective(params, &mut grad);
    if !value.is_finite() {
        return Err(Error::NonFinite { context: format!("initial objective {value}") });
    }
    let initial = value;
    let (b1, b2, eps) = (S::lit(ADAM_BETA1), S::lit(ADAM_BETA2), S::lit(ADAM_EPS));
    let mut m1 = vec![S::zero(); n];
    let mut m2 = vec![S::zero(); n];
    let mut dir = vec![S::zero(); n];
    let mut trial = vec![S::zero(); n];
    let mut trial_grad = vec![S::zero(); n];
    let mut stalled = 0usize;
    let mut done = 0usize;

    for t in 1..=cfg.iterations {
        done = t;
        match cfg.rule {
            StepRule::Gradient => dir.copy_from_slice(&grad),
            StepRule::Adam => {
                let c1 = S::one() - b1.powi(t as i32);
                let c2 = S::one() - b2.powi(t as i32);
                for i in 0..n {
                    m1[i] = b1 * m1[i] + (S::one() - b1) * grad[i];
                    m2[i] = b2 * m2[i] + (S::one() - b2) * grad[i] * grad[i];
                    dir[i] = (m1[i] / c1) / ((m2[i] / c2).sqrt() + eps);
                }
            }
        }
        if dir.iter().all(|&d| d == S::zero()) {
            break;
        }
        let mut improvement = None;
        // momentum can point away from ascent; retry along the raw gradient
        for fallback in [false, true] {
            if fallback {
                if cfg.rule == StepRule::Gradient {
                    break;
                }
                dir.copy_from_slice(&grad);
                m1.iter_mut().for_each(|v| *v = S::zero());
            }
            let mut step = S::lit(cfg.learning_rate);
            for _ in 0..=cfg.max_halvings {
                for i in 0..n {
                    trial[i] = params[i] + step * dir[i];
                }
                let tv = objective(&trial, &mut trial_grad);
                if tv.is_nan() {
                    return Err(Error::NonFinite { context: format!("objective became NaN at iteration {t}") });
                }
                if tv >= value {
                    improvement = Some(tv - value);
                    std::mem::swap(params, &mut trial);
                    std::mem::swap(&mut grad, &mut trial_grad);
                    value = tv;
                    break;
                }
                step *= S::lit(0.5);
            }
            if improvement.is_some() {
                break;
            }
        }
        let Some(gain) = improvement else { break };
        if cfg.patience > 0 {
            if gain <= S::lit(cfg.tolerance) * (S::one() + value.abs()) {
                stalled += 1;
                if stalled >= cfg.patience {
                    break;
                }
            } else {
                stalled = 0;
            }
        }
    }
    Ok(OptimizeReport { initial, final_value: value, iterations: done })
}
