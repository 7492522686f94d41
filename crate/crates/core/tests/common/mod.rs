#![allow(dead_code)]

use dope_core::mdp::{ActionId, DatasetMeta, Horizon, OfflineDataset, Policy, TransitionTuple};
use dope_core::models::FeatureMap;

pub fn policy() -> Policy<f64> {
    Policy::uniform(FeatureMap::Constant, 1).unwrap()
}

/// Single-observation chain with `n` tuples per step; the reward at step `h` is `reward(h, i)`.
pub fn chain(horizon: usize, n: usize, reward: impl Fn(usize, usize) -> Vec<f64>) -> OfflineDataset<f64> {
    let d = reward(1, 0).len();
    let tuples = (1..=horizon)
        .flat_map(|h| {
            let reward = &reward;
            (0..n).map(move |i| TransitionTuple { x: vec![0.0], a: ActionId(0), r: reward(h, i), x_next: vec![0.0], step: Some(h) })
        })
        .collect();
    let meta = DatasetMeta { env_id: "toy".into(), obs_dim: 1, reward_dim: d, num_actions: 1, horizon: Horizon::Finite { steps: horizon } };
    OfflineDataset::new(tuples, meta).unwrap()
}
