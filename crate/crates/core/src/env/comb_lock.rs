use serde::{Deserialize, Serialize};

use crate::mdp::{ActionId, DatasetMeta, Environment, Horizon, OfflineDataset, Policy, TransitionTuple};
use crate::models::FeatureMap;
use crate::{Error, Result, RngStream, Scalar};

/// Observation width: latent one-hot (2) + step one-hot (H) + noise.
pub const COMB_LOCK_OBS_DIM: usize = 30;

const RING_RADIUS: f64 = 2.0;
const RING_VARIANCE: f64 = 0.05;
const SCALAR_REWARD_STD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    /// `N(+1, 0.1^2)` on the good chain, `N(-1, 0.1^2)` on the bad one.
    ScalarGaussian,
    /// Noisy ring of radius 2 on the good chain, centered Gaussian on the bad one.
    Ring2d,
}

impl RewardMode {
    pub fn dim(self) -> usize {
        match self {
            RewardMode::ScalarGaussian => 1,
            RewardMode::Ring2d => 2,
        }
    }
}

/// Rich-observation combination lock with two latent chains.
///
/// Latent 0 is the good chain. Taking the step's optimal action on the good
/// chain keeps the agent there; anything else drops it to latent 1 forever.
/// The only reward arrives at step `H` and depends on the latent state there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationLock {
    horizon: usize,
    num_actions: usize,
    reward_mode: RewardMode,
    noise_std: f64,
    optimal_actions: Vec<usize>,
}

impl CombinationLock {
    pub fn new(horizon: usize, num_actions: usize, reward_mode: RewardMode, noise_std: f64) -> Result<Self> {
        if horizon == 0 || horizon + 2 > COMB_LOCK_OBS_DIM {
            return Err(Error::Config(format!(
                "horizon {horizon} does not fit a {COMB_LOCK_OBS_DIM}-dimensional observation (need 1 <= H <= {})",
                COMB_LOCK_OBS_DIM - 2
            )));
        }
        if num_actions < 2 {
            return Err(Error::Config("combination lock needs at least two actions".into()));
        }
        if !(noise_std >= 0.0) {
            return Err(Error::Config(format!("noise std {noise_std} must be non-negative")));
        }
        Ok(Self { horizon, num_actions, reward_mode, noise_std, optimal_actions: vec![0; horizon] })
    }

    /// Settings of the scalar-reward experiment: `H = 20`, two actions.
    pub fn scalar_default() -> Self {
        Self::new(20, 2, RewardMode::ScalarGaussian, 0.1).expect("valid defaults")
    }

    /// Settings of the ring-reward experiment: `H = 10`, two actions.
    pub fn ring_default() -> Self {
        Self::new(10, 2, RewardMode::Ring2d, 0.1).expect("valid defaults")
    }

    pub fn horizon_steps(&self) -> usize {
        self.horizon
    }

    pub fn reward_mode(&self) -> RewardMode {
        self.reward_mode
    }

    pub fn optimal_action(&self, step: usize) -> ActionId {
        ActionId(self.optimal_actions[step - 1])
    }

    pub fn feature_map(&self) -> FeatureMap {
        FeatureMap::CombinationLock { horizon: self.horizon }
    }

    /// Next latent state. The action at step `H` has no effect.
    pub fn transition(&self, latent: usize, step: usize, a: ActionId) -> usize {
        if step >= self.horizon {
            return latent;
        }
        if latent == 0 && a == self.optimal_action(step) {
            0
        } else {
            1
        }
    }

    /// Observation with the noise block left at zero.
    pub fn observe_noiseless<S: Scalar>(&self, latent: usize, step: usize) -> Vec<S> {
        let mut x = vec![S::zero(); COMB_LOCK_OBS_DIM];
        x[latent] = S::one();
        x[2 + step - 1] = S::one();
        x
    }

    pub fn observe_with_noise<S: Scalar>(&self, latent: usize, step: usize, rng: &mut RngStream) -> Vec<S> {
        let mut x = self.observe_noiseless(latent, step);
        let std = S::lit(self.noise_std);
        for v in &mut x[2 + self.horizon..] {
            *v = std * S::standard_normal(rng);
        }
        x
    }

    pub fn terminal_reward<S: Scalar>(&self, latent: usize, rng: &mut RngStream) -> Vec<S> {
        match self.reward_mode {
            RewardMode::ScalarGaussian => {
                let mean = if latent == 0 { S::one() } else { -S::one() };
                vec![mean + S::lit(SCALAR_REWARD_STD) * S::standard_normal(rng)]
            }
            RewardMode::Ring2d => {
                let sd = S::lit(RING_VARIANCE.sqrt());
                loop {
                    let x = [sd * S::standard_normal(rng), sd * S::standard_normal(rng)];
                    if latent != 0 {
                        return x.to_vec();
                    }
                    let norm = (x[0] * x[0] + x[1] * x[1]).sqrt();
                    // zero-norm draws are resampled
                    if norm >= S::lit(1e-12) {
                        let k = S::one() + S::lit(RING_RADIUS) / norm;
                        return vec![k * x[0], k * x[1]];
                    }
                }
            }
        }
    }

    /// Test policy: uniform random action with probability `epsilon`, optimal otherwise.
    pub fn test_policy<S: Scalar>(&self, epsilon: S) -> Result<Policy<S>> {
        let greedy: Vec<usize> =
            (1..=self.horizon).flat_map(|h| [self.optimal_actions[h - 1]; 2]).collect();
        Policy::epsilon_greedy(self.feature_map(), &greedy, epsilon, self.num_actions)
    }

    /// Probability of ending step `H` on the good chain, starting on the good
    /// chain at `step` and taking the optimal action there; exact DP over the latent chain.
    pub fn good_chain_probability<S: Scalar>(&self, policy: &Policy<S>, step: usize) -> S {
        // dist = (P[latent 0], P[latent 1]) at the current step
        // forced optimal action keeps latent 0 at step + 1
        let mut dist = [S::one(), S::zero()];
        if step < self.horizon {
            for k in step + 1..self.horizon {
                let x: Vec<S> = self.observe_noiseless(0, k);
                let stay = policy.probs(&x)[self.optimal_actions[k - 1]];
                dist = [dist[0] * stay, dist[1] + dist[0] * (S::one() - stay)];
            }
        }
        dist[0]
    }

    /// Probability of ending on the good chain under `policy` from the start state.
    pub fn initial_good_probability<S: Scalar>(&self, policy: &Policy<S>) -> S {
        let x: Vec<S> = self.observe_noiseless(0, 1);
        if self.horizon == 1 {
            return S::one();
        }
        policy.probs(&x)[self.optimal_actions[0]] * self.good_chain_probability(policy, 1)
    }

    pub fn dataset_meta(&self) -> DatasetMeta {
        DatasetMeta {
            env_id: match self.reward_mode {
                RewardMode::ScalarGaussian => "combination-lock-1d".into(),
                RewardMode::Ring2d => "combination-lock-2d".into(),
            },
            obs_dim: COMB_LOCK_OBS_DIM,
            reward_dim: self.reward_mode.dim(),
            num_actions: self.num_actions,
            horizon: Horizon::Finite { steps: self.horizon },
        }
    }

    /// For every step and latent state: `per_cell` fresh observations, a uniform
    /// action for each, and one simulated step. Total size `per_cell * H * 2`.
    ///
    /// Terminal tuples carry a copy of `x` as `x'`; it is never bootstrapped from.
    pub fn generate_offline_dataset<S: Scalar>(&self, per_cell: usize, rng: &mut RngStream) -> Result<OfflineDataset<S>> {
        if per_cell == 0 {
            return Err(Error::InvalidArgument("per_cell must be at least 1".into()));
        }
        let mut tuples = Vec::with_capacity(per_cell * self.horizon * 2);
        for h in 1..=self.horizon {
            for w in 0..2 {
                for _ in 0..per_cell {
                    let x = self.observe_with_noise::<S>(w, h, rng);
                    let a = ActionId(rng.index(self.num_actions));
                    let (r, w_next) = Environment::<S>::step(self, &w, h, a, rng);
                    let x_next = if h < self.horizon { self.observe_with_noise(w_next, h + 1, rng) } else { x.clone() };
                    tuples.push(TransitionTuple { x, a, r, x_next, step: Some(h) });
                }
            }
        }
        OfflineDataset::new(tuples, self.dataset_meta())
    }
}

impl<S: Scalar> Environment<S> for CombinationLock {
    type State = usize;

    fn horizon(&self) -> Horizon {
        Horizon::Finite { steps: self.horizon }
    }
    fn num_actions(&self) -> usize {
        self.num_actions
    }
    fn reward_dim(&self) -> usize {
        self.reward_mode.dim()
    }
    fn obs_dim(&self) -> usize {
        COMB_LOCK_OBS_DIM
    }
    fn initial_state(&self, _rng: &mut RngStream) -> usize {
        0
    }
    fn observe(&self, state: &usize, step: usize, rng: &mut RngStream) -> Vec<S> {
        self.observe_with_noise(*state, step, rng)
    }
    fn step(&self, state: &usize, step: usize, a: ActionId, rng: &mut RngStream) -> (Vec<S>, usize) {
        if step < self.horizon {
            (vec![S::zero(); self.reward_mode.dim()], self.transition(*state, step, a))
        } else {
            (self.terminal_reward(*state, rng), *state)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{conditional_returns, monte_carlo_returns};

    #[test]
    fn transition_rule() {
        let env = CombinationLock::scalar_default();
        assert_eq!(env.transition(0, 3, ActionId(0)), 0);
        assert_eq!(env.transition(0, 3, ActionId(1)), 1);
        assert_eq!(env.transition(1, 3, ActionId(0)), 1);
        assert_eq!(env.transition(1, 3, ActionId(1)), 1);
    }

    #[test]
    fn noiseless_layout() {
        let env = CombinationLock::scalar_default();
        let x: Vec<f64> = env.observe_noiseless(0, 1);
        let mut expect = vec![0.0; 30];
        expect[0] = 1.0;
        expect[2] = 1.0;
        assert_eq!(x, expect);
    }

    #[test]
    fn observation_noise_statistics() {
        let env = CombinationLock::scalar_default();
        let mut rng = RngStream::new(11);
        let mut sum2 = 0.0;
        let mut count = 0usize;
        let draws = 100_000 / 8;
        for _ in 0..draws {
            let x: Vec<f64> = env.observe_with_noise(1, 3, &mut rng);
            assert_eq!(x[1], 1.0);
            assert_eq!(x[0], 0.0);
            assert_eq!(x[2 + 2], 1.0);
            for &v in &x[22..] {
                sum2 += v * v;
                count += 1;
            }
        }
        let std = (sum2 / count as f64).sqrt();
        assert!((std - 0.1).abs() < 0.01, "noise std {std}");
    }

    #[test]
    fn same_seed_same_observation() {
        let env = CombinationLock::scalar_default();
        let a: Vec<f64> = env.observe_with_noise(0, 5, &mut RngStream::new(9));
        let b: Vec<f64> = env.observe_with_noise(0, 5, &mut RngStream::new(9));
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_oversized_horizon() {
        assert!(CombinationLock::new(29, 2, RewardMode::ScalarGaussian, 0.1).is_err());
        assert!(CombinationLock::new(28, 2, RewardMode::ScalarGaussian, 0.1).is_ok());
    }

    #[test]
    fn scalar_good_reward_mean() {
        let env = CombinationLock::scalar_default();
        let mut rng = RngStream::new(2);
        let n = 100_000;
        let m: f64 = (0..n).map(|_| env.terminal_reward::<f64>(0, &mut rng)[0]).sum::<f64>() / n as f64;
        assert!((m - 1.0).abs() < 0.01);
    }

    #[test]
    fn ring_reward_matches_direct_simulation() {
        use rand_distr::{Distribution, Normal};
        let env = CombinationLock::ring_default();
        let mut rng = RngStream::new(3);
        let n = 100_000;
        let radius: f64 = (0..n)
            .map(|_| {
                let r = env.terminal_reward::<f64>(0, &mut rng);
                (r[0] * r[0] + r[1] * r[1]).sqrt()
            })
            .sum::<f64>()
            / n as f64;
        // independent simulation of x + 2x/|x|, x ~ N(0, 0.05 I)
        let normal = Normal::new(0.0, 0.05f64.sqrt()).unwrap();
        let mut other = RngStream::new(1234);
        let oracle: f64 = (0..n)
            .map(|_| {
                let (a, b): (f64, f64) = (normal.sample(&mut other), normal.sample(&mut other));
                let nr = (a * a + b * b).sqrt();
                nr + 2.0
            })
            .sum::<f64>()
            / n as f64;
        // standard error of the radius mean is about 0.12 / sqrt(n)
        assert!((radius - oracle).abs() < 5.0 * 0.12 / (n as f64).sqrt() * 2f64.sqrt(), "{radius} vs {oracle}");
    }

    #[test]
    fn ring_bad_reward_is_centered() {
        let env = CombinationLock::ring_default();
        let mut rng = RngStream::new(4);
        let n = 100_000;
        let mut m = [0.0f64; 2];
        for _ in 0..n {
            let r = env.terminal_reward::<f64>(1, &mut rng);
            m[0] += r[0];
            m[1] += r[1];
        }
        let se = (0.05f64 / n as f64).sqrt();
        for v in m {
            assert!((v / n as f64).abs() < 3.0 * se);
        }
    }

    #[test]
    fn dataset_sizes_and_action_balance() {
        let env = CombinationLock::scalar_default();
        let d = env.generate_offline_dataset::<f64>(1, &mut RngStream::new(0)).unwrap();
        assert_eq!(d.len(), 40);
        let env2 = CombinationLock::new(2, 2, RewardMode::ScalarGaussian, 0.1).unwrap();
        let d = env2.generate_offline_dataset::<f32>(100_000, &mut RngStream::new(1)).unwrap();
        assert_eq!(d.len(), 400_000);
        let zeros = d.iter().filter(|t| t.a == ActionId(0)).count() as f64 / d.len() as f64;
        assert!((zeros - 0.5).abs() < 0.01);
    }

    #[test]
    fn latent_dp_matches_rollouts() {
        let env = CombinationLock::scalar_default();
        let pi = env.test_policy(1.0f64 / 7.0).unwrap();
        let p = env.initial_good_probability(&pi);
        assert!((p - (13.0f64 / 14.0).powi(19)).abs() < 1e-12);
        let m = 50_000;
        let z = monte_carlo_returns(&env, &pi, m, &mut RngStream::new(5)).unwrap();
        let good = z.as_flat().iter().filter(|&&v| v > 0.0).count() as f64 / m as f64;
        let se = (p * (1.0 - p) / m as f64).sqrt();
        assert!((good - p).abs() < 3.0 * se, "{good} vs {p}");
        // two clusters near +-1
        assert!(z.as_flat().iter().all(|v| (v.abs() - 1.0).abs() < 0.6));
    }

    #[test]
    fn conditional_dp_matches_rollouts() {
        let env = CombinationLock::scalar_default();
        let pi = env.test_policy(1.0f64 / 7.0).unwrap();
        for h in [1, 10, 19, 20] {
            let p = env.good_chain_probability(&pi, h);
            let m = 20_000;
            let z = conditional_returns(&env, &pi, &0, h, env.optimal_action(h), m, &mut RngStream::new(h as u64)).unwrap();
            let good = z.as_flat().iter().filter(|&&v| v > 0.0).count() as f64 / m as f64;
            let se = (p * (1.0 - p) / m as f64).sqrt().max(1e-9);
            assert!((good - p).abs() <= 3.0 * se, "h={h}: {good} vs {p}");
        }
    }
}
