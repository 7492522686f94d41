use super::{ActionId, EmpiricalDistribution, Horizon, Policy};
use crate::{Error, Result, RngStream, Scalar};

/// Default tail tolerance for truncating discounted rollouts.
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-6;

/// Simulator with a latent state. Steps are 1-based.
pub trait Environment<S: Scalar>: Sync {
    type State: Clone + Send;

    fn horizon(&self) -> Horizon;
    fn num_actions(&self) -> usize;
    fn reward_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;

    fn initial_state(&self, rng: &mut RngStream) -> Self::State;
    fn observe(&self, state: &Self::State, step: usize, rng: &mut RngStream) -> Vec<S>;
    /// Reward and next latent state after taking `a` in `state` at `step`.
    fn step(&self, state: &Self::State, step: usize, a: ActionId, rng: &mut RngStream) -> (Vec<S>, Self::State);
}

/// Smallest `L` with `gamma^L * sqrt(d) / (1 - gamma) <= tol`.
pub fn truncation_length(gamma: f64, reward_dim: usize, tol: f64) -> usize {
    if gamma <= 0.0 {
        return 1;
    }
    let l = (tol * (1.0 - gamma) / (reward_dim as f64).sqrt()).ln() / gamma.ln();
    (l.ceil().max(1.0)) as usize
}

/// `m` i.i.d. returns of `policy` from the initial distribution.
pub fn monte_carlo_returns<S: Scalar, E: Environment<S>>(
    env: &E,
    policy: &Policy<S>,
    m: usize,
    rng: &mut RngStream,
) -> Result<EmpiricalDistribution<S>> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one rollout".into()));
    }
    let d = env.reward_dim();
    let mut data = Vec::with_capacity(m * d);
    for _ in 0..m {
        let s = env.initial_state(rng);
        let x = env.observe(&s, 1, rng);
        let a = policy.sample(&x, rng);
        data.extend(rollout(env, policy, s, 1, a, rng));
    }
    EmpiricalDistribution::from_flat(d, data)
}

/// `m` samples of the return conditioned on `(state, a)` at `step`, following `policy` afterwards.
pub fn conditional_returns<S: Scalar, E: Environment<S>>(
    env: &E,
    policy: &Policy<S>,
    state: &E::State,
    step: usize,
    a: ActionId,
    m: usize,
    rng: &mut RngStream,
) -> Result<EmpiricalDistribution<S>> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one rollout".into()));
    }
    let d = env.reward_dim();
    let mut data = Vec::with_capacity(m * d);
    for _ in 0..m {
        data.extend(rollout(env, policy, state.clone(), step, a, rng));
    }
    EmpiricalDistribution::from_flat(d, data)
}

fn rollout<S: Scalar, E: Environment<S>>(
    env: &E,
    policy: &Policy<S>,
    mut state: E::State,
    start: usize,
    first_action: ActionId,
    rng: &mut RngStream,
) -> Vec<S> {
    let d = env.reward_dim();
    let mut z = vec![S::zero(); d];
    let (last, gamma) = match env.horizon() {
        Horizon::Finite { steps } => (steps, S::one()),
        Horizon::Discounted { gamma } => {
            (start - 1 + truncation_length(gamma, d, DEFAULT_TRUNCATION_TOL), S::lit(gamma))
        }
    };
    let mut discount = S::one();
    let mut a = first_action;
    for h in start..=last {
        if h > start {
            let x = env.observe(&state, h, rng);
            a = policy.sample(&x, rng);
        }
        let (r, next) = env.step(&state, h, a, rng);
        for (zi, ri) in z.iter_mut().zip(r) {
            *zi += discount * ri;
        }
        discount *= gamma;
        state = next;
    }
    z
}
