use serde::{Deserialize, Serialize};

use super::{cvar, cvar_discrete, empirical_tv, exact_wasserstein_p, transport_cost, DiscreteLaw, HistogramSpec};
use crate::env::TabularMdp;
use crate::mdp::{ActionId, EmpiricalDistribution, Environment, Horizon, Policy};
use crate::models::ConditionalDensity;
use crate::{Error, Result, RngStream, Scalar};

/// Two sides of an inequality `lhs <= rhs` and whether it held at the check's tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `m` draws of `r + scale * y`, `(r, x') ~ P(. | state, a)` at `step`,
/// `a' ~ pi(x')`, `y ~ f(x', a')`. Without `f` the draws are pure rewards.
#[allow(clippy::too_many_arguments)]
pub fn apply_bellman<S, E, M>(
    f: Option<&M>,
    env: &E,
    policy: &Policy<S>,
    state: &E::State,
    step: usize,
    a: ActionId,
    scale: S,
    m: usize,
    rng: &mut RngStream,
) -> Result<EmpiricalDistribution<S>>
where
    S: Scalar,
    E: Environment<S>,
    M: ConditionalDensity<S>,
{
    let d = env.reward_dim();
    let mut data = vec![S::zero(); m * d];
    let mut y = vec![S::zero(); d];
    for z in data.chunks_exact_mut(d) {
        let (r, next) = env.step(state, step, a, rng);
        z.copy_from_slice(&r);
        if let Some(f) = f {
            let x = env.observe(&next, step + 1, rng);
            let an = policy.sample(&x, rng);
            f.sample_into(&x, an, rng, &mut y);
            for j in 0..d {
                z[j] += scale * y[j];
            }
        }
    }
    EmpiricalDistribution::from_flat(d, data)
}

/// Empirical check of the discounted Bellman operator's contraction in the
/// `d^pi`-weighted `W_p` metric:
/// `(E_{d^pi} W_p^{2p}(Tf, Tf'))^{1/2p} <= gamma^{1 - 1/2p} (E_{d^pi} W_p^{2p}(f, f'))^{1/2p}`.
///
/// Both operator images share the environment draws (common random numbers);
/// every `W_p` is exact on `m`-sample empirical laws.
#[allow(clippy::too_many_arguments)]
pub fn check_contraction<S, F, G>(
    mdp: &TabularMdp,
    policy: &Policy<S>,
    f: &F,
    g: &G,
    order: f64,
    m: usize,
    tol: f64,
    rng: &RngStream,
) -> Result<CheckOutcome>
where
    S: Scalar,
    F: ConditionalDensity<S>,
    G: ConditionalDensity<S>,
{
    let Horizon::Discounted { gamma } = Environment::<S>::horizon(mdp) else {
        return Err(Error::InvalidArgument("contraction check needs a discounted MDP".into()));
    };
    let occ = mdp.occupancy_discounted(policy, S::lit(gamma));
    let na = Environment::<S>::num_actions(mdp);
    let two_p = 2.0 * order;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for (pair, &w) in occ.iter().enumerate() {
        let w = w.as_f64();
        if w <= 0.0 {
            continue;
        }
        let (x, a) = (pair / na, ActionId(pair % na));
        let obs: Vec<S> = mdp.one_hot(x);
        let env_rng = rng.derive_indexed("env", pair as u64);
        let tf = apply_bellman(Some(f), mdp, policy, &x, 1, a, S::lit(gamma), m, &mut env_rng.clone())?;
        let tg = apply_bellman(Some(g), mdp, policy, &x, 1, a, S::lit(gamma), m, &mut env_rng.clone())?;
        let mut model_rng = rng.derive_indexed("model", pair as u64);
        let fs = EmpiricalDistribution::new((0..m).map(|_| f.sample(&obs, a, &mut model_rng)).collect())?;
        let gs = EmpiricalDistribution::new((0..m).map(|_| g.sample(&obs, a, &mut model_rng)).collect())?;
        lhs += w * exact_wasserstein_p(&tf, &tg, order)?.powf(two_p);
        rhs += w * exact_wasserstein_p(&fs, &gs, order)?.powf(two_p);
    }
    let lhs = lhs.powf(1.0 / two_p);
    let rhs = rhs.powf(1.0 / two_p);
    let bound = gamma.powf(1.0 - 1.0 / two_p) * rhs * (1.0 + tol);
    Ok(CheckOutcome { lhs, rhs, pass: lhs <= bound + 1e-12 })
}

/// `W_p^p(p, q) <= diam^p * TV(p, q)` on exact discrete laws.
pub fn check_tv_dominance(p: &DiscreteLaw, q: &DiscreteLaw, order: f64, diam: f64) -> Result<CheckOutcome> {
    let lhs = transport_cost(p, q, order)?;
    let rhs = diam.powf(order) * p.tv(q);
    Ok(CheckOutcome { lhs, rhs, pass: lhs <= rhs + 1e-9 })
}

/// `|CVaR(f) - CVaR(g)| <= (2 H / tau) TV(f, g)` on exact discrete laws.
pub fn check_cvar_lipschitz_exact(f: &DiscreteLaw, g: &DiscreteLaw, tau: f64, h_max: f64) -> Result<CheckOutcome> {
    let lhs = (cvar_discrete(f, tau)? - cvar_discrete(g, tau)?).abs();
    let rhs = 2.0 * h_max / tau * f.tv(g);
    Ok(CheckOutcome { lhs, rhs, pass: lhs <= rhs + 1e-12 })
}

/// Sample version of the CVaR bound. The histogram TV may undercount
/// differences inside a bin, and the CVaR grid adds its own error, so the
/// right side carries `2 * bin_width / tau + 2 * grid_step` of slack.
pub fn check_cvar_lipschitz<S: Scalar>(
    f: &EmpiricalDistribution<S>,
    g: &EmpiricalDistribution<S>,
    tau: f64,
    h_max: f64,
    bins: usize,
    grid_size: usize,
) -> Result<CheckOutcome> {
    let spec = HistogramSpec::uniform(1, bins, 0.0, h_max)?;
    let tv = empirical_tv(f, g, &spec)?;
    let lhs = (cvar(f, tau, grid_size)? - cvar(g, tau, grid_size)?).abs();
    let slack = 2.0 * (h_max / bins as f64) / tau + 2.0 * h_max / (grid_size - 1) as f64;
    let rhs = 2.0 * h_max / tau * tv + slack;
    Ok(CheckOutcome { lhs, rhs, pass: lhs <= rhs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dominance_extremes() {
        let a = DiscreteLaw::point(vec![0.0]);
        let b = DiscreteLaw::point(vec![2.5]);
        let out = check_tv_dominance(&a, &b, 1.0, 2.5).unwrap();
        assert!((out.lhs - 2.5).abs() < 1e-12 && (out.rhs - 2.5).abs() < 1e-12 && out.pass);
        assert!(check_tv_dominance(&a, &a, 2.0, 1.0).unwrap().pass);
    }

    #[test]
    fn cvar_bound_for_opposite_point_masses() {
        let h = 3.0;
        let out = check_cvar_lipschitz_exact(&DiscreteLaw::point(vec![0.0]), &DiscreteLaw::point(vec![h]), 0.5, h).unwrap();
        assert!((out.lhs - h).abs() < 1e-12 && (out.rhs - 4.0 * h).abs() < 1e-12 && out.pass);
    }

    #[test]
    fn sample_cvar_check_on_identical_sets() {
        let f = EmpiricalDistribution::from_scalars(vec![0.1, 0.5, 0.9f64]).unwrap();
        let out = check_cvar_lipschitz(&f, &f, 0.5, 1.0, 50, 1001).unwrap();
        assert_eq!(out.lhs, 0.0);
        assert!(out.pass);
    }
}
