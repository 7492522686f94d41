use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::mdp::{ActionId, DatasetMeta, Environment, Horizon, OfflineDataset, Policy, TransitionTuple};
use crate::models::{FeatureMap, TabularMixtureModel};
use crate::{Error, Result, RngStream, Scalar};

const ROW_TOL: f64 = 1e-9;

/// Scalar reward law with an analytic density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RewardDensity {
    Gaussian { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
}

impl RewardDensity {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RewardDensity::Gaussian { mean, std } if mean.is_finite() && std > 0.0 => Ok(()),
            RewardDensity::Uniform { low, high } if low.is_finite() && high > low => Ok(()),
            other => Err(Error::Validation(format!("degenerate reward density {other:?}"))),
        }
    }

    pub fn pdf<S: Scalar>(&self, z: S) -> S {
        let z = z.as_f64();
        let p = match *self {
            RewardDensity::Gaussian { mean, std } => {
                let u = (z - mean) / std;
                (-0.5 * u * u).exp() / (std * (2.0 * PI).sqrt())
            }
            RewardDensity::Uniform { low, high } => {
                if (low..=high).contains(&z) {
                    1.0 / (high - low)
                } else {
                    0.0
                }
            }
        };
        S::lit(p)
    }

    pub fn sample<S: Scalar>(&self, rng: &mut RngStream) -> S {
        match *self {
            RewardDensity::Gaussian { mean, std } => S::lit(mean) + S::lit(std) * S::standard_normal(rng),
            RewardDensity::Uniform { low, high } => S::lit(low) + S::lit(high - low) * S::unit(rng),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            RewardDensity::Gaussian { mean, .. } => mean,
            RewardDensity::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    /// Interval holding all but a negligible amount of mass.
    pub fn effective_support(&self) -> (f64, f64) {
        match *self {
            RewardDensity::Gaussian { mean, std } => (mean - 8.0 * std, mean + 8.0 * std),
            RewardDensity::Uniform { low, high } => (low, high),
        }
    }
}

/// Per `(h, x, a)` weights over terminal `(x', a')` pairs; row index `x * A + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureWeights<S> {
    pub num_states: usize,
    pub num_actions: usize,
    /// `steps[h - 1][x * A + a]` is a probability vector of length `|X||A|`.
    pub steps: Vec<Vec<Vec<S>>>,
}

impl<S: Scalar> MixtureWeights<S> {
    pub fn get(&self, step: usize, x: usize, a: ActionId) -> &[S] {
        &self.steps[step - 1][x * self.num_actions + a.0]
    }
}

/// Finite tabular MDP.
///
/// With a finite horizon the reward is sparse: zero before step `H`, drawn from
/// `rewards[x * A + a]` at step `H`. With a discount factor the same laws are
/// paid at every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    horizon: Horizon,
    /// `transitions[x * A + a][x']`.
    transitions: Vec<Vec<f64>>,
    rewards: Vec<RewardDensity>,
    initial: Vec<f64>,
}

impl TabularMdp {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: Horizon,
        transitions: Vec<Vec<f64>>,
        rewards: Vec<RewardDensity>,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let pairs = num_states * num_actions;
        if pairs == 0 {
            return Err(Error::Validation("empty state or action space".into()));
        }
        if transitions.len() != pairs || rewards.len() != pairs {
            return Err(Error::Validation(format!(
                "expected {pairs} transition rows and reward laws, got {} and {}",
                transitions.len(),
                rewards.len()
            )));
        }
        for (i, row) in transitions.iter().enumerate() {
            check_prob_row(row, num_states).map_err(|e| Error::Validation(format!("transition row {i}: {e}")))?;
        }
        check_prob_row(&initial, num_states).map_err(|e| Error::Validation(format!("initial distribution: {e}")))?;
        for r in &rewards {
            r.validate()?;
        }
        match horizon {
            Horizon::Finite { steps: 0 } => {
                return Err(Error::Validation("horizon must be at least 1".into()))
            }
            Horizon::Discounted { gamma } if !(0.0..1.0).contains(&gamma) => {
                return Err(Error::Validation(format!("discount {gamma} outside [0, 1)")))
            }
            _ => {}
        }
        Ok(Self { num_states, num_actions, horizon, transitions, rewards, initial })
    }

    /// Random instance with Dirichlet(1) transition rows and Gaussian terminal rewards in `[0, 1]`.
    pub fn random(num_states: usize, num_actions: usize, horizon: Horizon, rng: &mut RngStream) -> Result<Self> {
        let mut dirichlet = |k: usize| -> Vec<f64> {
            let e: Vec<f64> = (0..k).map(|_| -(1.0 - f64::unit(rng)).ln()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        };
        let pairs = num_states * num_actions;
        let transitions = (0..pairs).map(|_| dirichlet(num_states)).collect();
        let initial = dirichlet(num_states);
        let rewards = (0..pairs)
            .map(|_| RewardDensity::Gaussian { mean: 0.2 + 0.6 * f64::unit(rng), std: 0.05 + 0.05 * f64::unit(rng) })
            .collect();
        Self::new(num_states, num_actions, horizon, transitions, rewards, initial)
    }

    /// Fixed 4-state, 2-action, `H = 3` sparse-reward instance used by the oracle checks.
    pub fn reference_four_state() -> Self {
        let transitions = vec![
            vec![0.70, 0.10, 0.10, 0.10],
            vec![0.10, 0.60, 0.00, 0.30],
            vec![0.00, 0.50, 0.50, 0.00],
            vec![0.25, 0.25, 0.25, 0.25],
            vec![0.10, 0.00, 0.80, 0.10],
            vec![0.40, 0.00, 0.00, 0.60],
            vec![0.00, 0.30, 0.30, 0.40],
            vec![0.50, 0.00, 0.50, 0.00],
        ];
        let rewards = vec![
            RewardDensity::Gaussian { mean: 0.15, std: 0.05 },
            RewardDensity::Gaussian { mean: 0.35, std: 0.06 },
            RewardDensity::Uniform { low: 0.0, high: 0.3 },
            RewardDensity::Gaussian { mean: 0.55, std: 0.05 },
            RewardDensity::Uniform { low: 0.6, high: 1.0 },
            RewardDensity::Gaussian { mean: 0.80, std: 0.07 },
            RewardDensity::Gaussian { mean: 0.45, std: 0.10 },
            RewardDensity::Uniform { low: 0.25, high: 0.75 },
        ];
        Self::new(4, 2, Horizon::Finite { steps: 3 }, transitions, rewards, vec![0.4, 0.3, 0.2, 0.1])
            .expect("reference instance is valid")
    }

    /// Two-state, two-action discounted instance with uniform per-step rewards.
    pub fn reference_two_state(gamma: f64) -> Result<Self> {
        let transitions = vec![vec![0.8, 0.2], vec![0.3, 0.7], vec![0.5, 0.5], vec![0.1, 0.9]];
        let rewards = vec![
            RewardDensity::Uniform { low: 0.0, high: 0.5 },
            RewardDensity::Uniform { low: 0.25, high: 0.75 },
            RewardDensity::Uniform { low: 0.5, high: 1.0 },
            RewardDensity::Uniform { low: 0.0, high: 1.0 },
        ];
        Self::new(2, 2, Horizon::Discounted { gamma }, transitions, rewards, vec![0.5, 0.5])
    }

    /// Same dynamics with a different horizon or discount.
    pub fn with_horizon(&self, horizon: Horizon) -> Result<Self> {
        Self::new(
            self.num_states,
            self.num_actions,
            horizon,
            self.transitions.clone(),
            self.rewards.clone(),
            self.initial.clone(),
        )
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }
    pub fn num_pairs(&self) -> usize {
        self.num_states * self.num_actions
    }
    pub fn transition_row(&self, x: usize, a: ActionId) -> &[f64] {
        &self.transitions[x * self.num_actions + a.0]
    }
    pub fn reward_law(&self, x: usize, a: ActionId) -> &RewardDensity {
        &self.rewards[x * self.num_actions + a.0]
    }
    pub fn reward_laws(&self) -> &[RewardDensity] {
        &self.rewards
    }
    pub fn initial_distribution(&self) -> &[f64] {
        &self.initial
    }
    pub fn feature_map(&self) -> FeatureMap {
        FeatureMap::OneHot { size: self.num_states }
    }

    pub fn one_hot<S: Scalar>(&self, x: usize) -> Vec<S> {
        let mut v = vec![S::zero(); self.num_states];
        v[x] = S::one();
        v
    }

    fn policy_row<'p, S: Scalar>(&self, policy: &'p Policy<S>, x: usize) -> &'p [S] {
        policy.probs_for_cell(policy.feature().cell(&self.one_hot::<S>(x)))
    }

    /// Exact backward DP for the terminal-pair mixture weights of `Z^pi_h(x, a)`.
    pub fn exact_mixture_weights<S: Scalar>(&self, policy: &Policy<S>) -> Result<MixtureWeights<S>> {
        let steps = self
            .horizon
            .steps()
            .ok_or_else(|| Error::InvalidArgument("mixture weights need a finite horizon".into()))?;
        if policy.num_actions() != self.num_actions {
            return Err(Error::DimensionMismatch { expected: self.num_actions, got: policy.num_actions() });
        }
        let pairs = self.num_pairs();
        let mut out: Vec<Vec<Vec<S>>> = vec![Vec::new(); steps];
        out[steps - 1] = (0..pairs)
            .map(|i| (0..pairs).map(|j| if i == j { S::one() } else { S::zero() }).collect())
            .collect();
        for h in (1..steps).rev() {
            let next = &out[h];
            let mut layer = vec![vec![S::zero(); pairs]; pairs];
            for (i, row) in layer.iter_mut().enumerate() {
                for (xn, &p) in self.transitions[i].iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    for (an, &q) in self.policy_row(policy, xn).iter().enumerate() {
                        let coef = S::lit(p) * q;
                        if coef == S::zero() {
                            continue;
                        }
                        for (w, &v) in row.iter_mut().zip(&next[xn * self.num_actions + an]) {
                            *w += coef * v;
                        }
                    }
                }
            }
            out[h - 1] = layer;
        }
        Ok(MixtureWeights { num_states: self.num_states, num_actions: self.num_actions, steps: out })
    }

    /// Exact `Z^pi_h` for every step as mixture models over the terminal reward laws.
    pub fn exact_return_models<S: Scalar>(&self, policy: &Policy<S>) -> Result<Vec<TabularMixtureModel<S>>> {
        let w = self.exact_mixture_weights(policy)?;
        w.steps
            .into_iter()
            .map(|layer| TabularMixtureModel::new(self.feature_map(), self.num_actions, self.rewards.clone(), layer))
            .collect::<Result<_>>()
    }

    /// Mixture weights of `Z^pi = E_{x ~ mu, a ~ pi} Z^pi_1(x, a)`.
    pub fn exact_initial_weights<S: Scalar>(&self, policy: &Policy<S>) -> Result<Vec<S>> {
        let w = self.exact_mixture_weights(policy)?;
        let mut out = vec![S::zero(); self.num_pairs()];
        for (x, &mu) in self.initial.iter().enumerate() {
            for (a, &p) in self.policy_row(policy, x).iter().enumerate() {
                for (o, &v) in out.iter_mut().zip(w.get(1, x, ActionId(a))) {
                    *o += S::lit(mu) * p * v;
                }
            }
        }
        Ok(out)
    }

    /// State-action occupancy `d^pi_h(x, a)` for each step of a finite horizon, by forward DP.
    pub fn occupancy_finite<S: Scalar>(&self, policy: &Policy<S>, steps: usize) -> Vec<Vec<S>> {
        let na = self.num_actions;
        let mut state: Vec<S> = self.initial.iter().map(|&p| S::lit(p)).collect();
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let mut d = vec![S::zero(); self.num_pairs()];
            for (x, &px) in state.iter().enumerate() {
                for (a, &q) in self.policy_row(policy, x).iter().enumerate() {
                    d[x * na + a] = px * q;
                }
            }
            let mut next = vec![S::zero(); self.num_states];
            for (i, &dv) in d.iter().enumerate() {
                for (n, &p) in next.iter_mut().zip(&self.transitions[i]) {
                    *n += dv * S::lit(p);
                }
            }
            out.push(d);
            state = next;
        }
        out
    }

    /// Discounted occupancy `(1 - gamma) sum_h gamma^(h-1) d^pi_h` by power iteration.
    pub fn occupancy_discounted<S: Scalar>(&self, policy: &Policy<S>, gamma: S) -> Vec<S> {
        let na = self.num_actions;
        let mut state: Vec<S> = self.initial.iter().map(|&p| S::lit(p)).collect();
        let mut acc = vec![S::zero(); self.num_pairs()];
        let mut weight = S::one() - gamma;
        let mut mass = S::one();
        while mass > S::lit(1e-15) {
            let mut next = vec![S::zero(); self.num_states];
            for (x, &px) in state.iter().enumerate() {
                for (a, &q) in self.policy_row(policy, x).iter().enumerate() {
                    let d = px * q;
                    acc[x * na + a] += weight * d;
                    for (n, &p) in next.iter_mut().zip(&self.transitions[x * na + a]) {
                        *n += d * S::lit(p);
                    }
                }
            }
            state = next;
            mass *= gamma;
            weight *= gamma;
            if gamma == S::zero() {
                break;
            }
        }
        acc
    }

    pub fn dataset_meta(&self) -> DatasetMeta {
        DatasetMeta {
            env_id: format!("tabular-{}x{}", self.num_states, self.num_actions),
            obs_dim: self.num_states,
            reward_dim: 1,
            num_actions: self.num_actions,
            horizon: self.horizon,
        }
    }

    /// `n` tuples with `(x, a)` uniform over all pairs. A finite horizon spreads
    /// them evenly over the steps and labels each tuple with its step.
    pub fn generate_uniform_dataset<S: Scalar>(&self, n: usize, rng: &mut RngStream) -> Result<OfflineDataset<S>> {
        let steps = self.horizon.steps();
        if n == 0 || steps.is_some_and(|h| n < h) {
            return Err(Error::InvalidArgument(format!("dataset size {n} too small")));
        }
        let mut tuples = Vec::with_capacity(n);
        for i in 0..n {
            let step = steps.map(|h| 1 + i * h / n);
            let x = rng.index(self.num_states);
            let a = ActionId(rng.index(self.num_actions));
            let (r, xn) = Environment::<S>::step(self, &x, step.unwrap_or(1), a, rng);
            tuples.push(TransitionTuple { x: self.one_hot(x), a, r, x_next: self.one_hot(xn), step });
        }
        OfflineDataset::new(tuples, self.dataset_meta())
    }
}

fn check_prob_row(row: &[f64], len: usize) -> std::result::Result<(), String> {
    if row.len() != len {
        return Err(format!("length {} != {len}", row.len()));
    }
    if row.iter().any(|&p| !(p >= 0.0)) {
        return Err("negative or NaN entry".into());
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > ROW_TOL {
        return Err(format!("sums to {s}"));
    }
    Ok(())
}

impl<S: Scalar> Environment<S> for TabularMdp {
    type State = usize;

    fn horizon(&self) -> Horizon {
        self.horizon
    }
    fn num_actions(&self) -> usize {
        self.num_actions
    }
    fn reward_dim(&self) -> usize {
        1
    }
    fn obs_dim(&self) -> usize {
        self.num_states
    }
    fn initial_state(&self, rng: &mut RngStream) -> usize {
        rng.categorical(&self.initial)
    }
    fn observe(&self, state: &usize, _step: usize, _rng: &mut RngStream) -> Vec<S> {
        self.one_hot(*state)
    }
    fn step(&self, state: &usize, step: usize, a: ActionId, rng: &mut RngStream) -> (Vec<S>, usize) {
        let i = *state * self.num_actions + a.0;
        let pays = match self.horizon {
            Horizon::Finite { steps } => step == steps,
            Horizon::Discounted { .. } => true,
        };
        let r = if pays { self.rewards[i].sample(rng) } else { S::zero() };
        let next = rng.categorical(&self.transitions[i]);
        (vec![r], next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple(transitions: Vec<Vec<f64>>, ns: usize, na: usize, h: usize) -> TabularMdp {
        let rewards = (0..ns * na).map(|i| RewardDensity::Gaussian { mean: 0.1 * i as f64, std: 0.1 }).collect();
        let mut init = vec![0.0; ns];
        init[0] = 1.0;
        TabularMdp::new(ns, na, Horizon::Finite { steps: h }, transitions, rewards, init).unwrap()
    }

    #[test]
    fn malformed_transitions_rejected() {
        let r = vec![RewardDensity::Uniform { low: 0.0, high: 1.0 }; 2];
        assert!(TabularMdp::new(1, 2, Horizon::Finite { steps: 2 }, vec![vec![0.9], vec![1.0]], r.clone(), vec![1.0]).is_err());
        assert!(TabularMdp::new(1, 2, Horizon::Finite { steps: 2 }, vec![vec![1.0]], r, vec![1.0]).is_err());
    }

    #[test]
    fn deterministic_chain_gives_indicator() {
        // 0 -> 1 -> 2 -> 2 whatever the action
        let t = vec![vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]];
        let mdp = simple(t, 3, 2, 3);
        let pi = Policy::<f64>::deterministic(mdp.feature_map(), &[0, 1, 0], 2).unwrap();
        let w = mdp.exact_mixture_weights(&pi).unwrap();
        let row = w.get(1, 0, ActionId(0));
        // x=0 -> 1 (pi: a=1) -> 2 (pi: a=0): terminal pair (2, 0) = index 4
        let expect: Vec<f64> = (0..6).map(|j| if j == 4 { 1.0 } else { 0.0 }).collect();
        assert_eq!(row, expect.as_slice());
    }

    #[test]
    fn single_state_uniform_policy() {
        let mdp = simple(vec![vec![1.0], vec![1.0]], 1, 2, 2);
        let pi = Policy::<f64>::uniform(mdp.feature_map(), 2).unwrap();
        let w = mdp.exact_mixture_weights(&pi).unwrap();
        assert_eq!(w.get(1, 0, ActionId(0)), &[0.5, 0.5]);
        assert_eq!(w.get(1, 0, ActionId(1)), &[0.5, 0.5]);
    }

    #[test]
    fn rows_are_probability_vectors() {
        let mut rng = RngStream::new(8);
        for _ in 0..10 {
            let mdp = TabularMdp::random(5, 3, Horizon::Finite { steps: 4 }, &mut rng).unwrap();
            let pi = Policy::<f64>::uniform(mdp.feature_map(), 3).unwrap();
            let w = mdp.exact_mixture_weights(&pi).unwrap();
            for layer in &w.steps {
                for row in layer {
                    assert!(row.iter().all(|&v| v >= 0.0));
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn weights_match_terminal_pair_frequencies() {
        let mut rng = RngStream::new(21);
        let mdp = TabularMdp::random(4, 2, Horizon::Finite { steps: 3 }, &mut rng).unwrap();
        let probs: Vec<Vec<f64>> = (0..4).map(|x| vec![0.3 + 0.1 * x as f64, 0.7 - 0.1 * x as f64]).collect();
        let pi = Policy::tabular(mdp.feature_map(), probs).unwrap();
        let w = mdp.exact_mixture_weights(&pi).unwrap();
        let (x0, a0) = (1usize, ActionId(0));
        let rollouts = 1_000_000;
        let mut counts = [0usize; 8];
        for _ in 0..rollouts {
            let mut x = x0;
            let mut a = a0;
            for h in 1..3 {
                let (_r, xn): (Vec<f64>, usize) = Environment::<f64>::step(&mdp, &x, h, a, &mut rng);
                x = xn;
                a = pi.sample(&mdp.one_hot::<f64>(x), &mut rng);
            }
            counts[x * 2 + a.0] += 1;
        }
        for (j, &c) in counts.iter().enumerate() {
            let f = c as f64 / rollouts as f64;
            assert!((f - w.get(1, x0, a0)[j]).abs() < 0.01, "pair {j}: {f} vs {}", w.get(1, x0, a0)[j]);
        }
    }

    #[test]
    fn discounted_occupancy_sums_to_one() {
        let mdp = TabularMdp::reference_two_state(0.9).unwrap();
        let pi = Policy::<f64>::uniform(mdp.feature_map(), 2).unwrap();
        let d = mdp.occupancy_discounted(&pi, 0.9);
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_dataset_step_labels() {
        let mdp = TabularMdp::reference_four_state();
        let d = mdp.generate_uniform_dataset::<f64>(30, &mut RngStream::new(0)).unwrap();
        let parts = d.split_by_step(3).unwrap();
        assert!(parts.iter().all(|p| p.len() == 10));
        // rewards only at the last step
        assert!(parts[0].iter().all(|t| t.r[0] == 0.0));
    }

    #[test]
    fn uniform_density_integrates_to_one() {
        let u = RewardDensity::Uniform { low: 0.2, high: 0.7 };
        let g = RewardDensity::Gaussian { mean: 0.5, std: 0.05 };
        for law in [u, g] {
            let n = 200_000;
            let (lo, hi) = (-0.5, 1.5);
            let dz = (hi - lo) / n as f64;
            let total: f64 = (0..n).map(|i| law.pdf(lo + (i as f64 + 0.5) * dz) * dz).sum();
            assert!((total - 1.0).abs() < 1e-4);
        }
    }
}
