//! Fitted likelihood estimation: a backward (finite horizon) or iterated
//! (discounted) sequence of maximum-likelihood fits, each one targeting the
//! Bellman image of the previous fit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mdp::{ActionId, EmpiricalDistribution, Environment, OfflineDataset, Policy};
use crate::models::{ConditionalDensity, FittedModel, ModelSpec, PointMass, RegressionTargets};
use crate::{Error, Result, RngStream, Scalar};

/// Targets are built in shards of this many tuples, each with its own derived
/// stream, so results do not depend on the worker count.
const TARGET_SHARD: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// `D_h` holds exactly the tuples labeled with step `h`.
    #[default]
    ByStep,
    /// Uniform random even split, ignoring step labels.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleFiniteConfig {
    pub horizon: usize,
    pub model: ModelSpec,
    #[serde(default)]
    pub split: SplitMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleInfiniteConfig {
    pub gamma: f64,
    /// Number of iterations `T`; [`default_iterations`] when absent.
    #[serde(default)]
    pub iterations: Option<usize>,
    pub model: ModelSpec,
}

/// Provenance of one regression fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    /// Step `h` (finite horizon) or iteration `t` (discounted).
    pub index: usize,
    pub num_targets: usize,
    /// Hash of the subset this fit regressed on.
    pub subset_hash: String,
    /// Hashes of every subset this fit depends on, itself first.
    pub depends_on: Vec<String>,
    pub initial_objective: f64,
    pub final_objective: f64,
}

/// Fitted conditional return models. `models[h - 1]` is `f_h` for a finite
/// horizon; a discounted run holds the single final model.
#[derive(Debug, Clone)]
pub struct ReturnEstimator<S> {
    pub models: Vec<FittedModel<S>>,
    pub records: Vec<FitRecord>,
}

impl<S: Scalar> ReturnEstimator<S> {
    /// `f_h` (1-based); for a discounted estimator any `h` maps to the final model.
    pub fn model(&self, h: usize) -> &FittedModel<S> {
        if self.models.len() == 1 {
            &self.models[0]
        } else {
            &self.models[h - 1]
        }
    }

    /// `m` draws of `z ~ f_1(x, a)` with `x ~ mu`, `a ~ pi(x)`.
    pub fn sample<E: Environment<S>>(
        &self,
        env: &E,
        policy: &Policy<S>,
        m: usize,
        rng: &mut RngStream,
    ) -> Result<EmpiricalDistribution<S>> {
        estimator_sample(self.model(1), env, policy, m, rng)
    }
}

pub fn estimator_sample<S: Scalar, E: Environment<S>, M: ConditionalDensity<S>>(
    model: &M,
    env: &E,
    policy: &Policy<S>,
    m: usize,
    rng: &mut RngStream,
) -> Result<EmpiricalDistribution<S>> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let d = model.reward_dim();
    let mut data = vec![S::zero(); m * d];
    for out in data.chunks_exact_mut(d) {
        let s = env.initial_state(rng);
        let x = env.observe(&s, 1, rng);
        let a = policy.sample(&x, rng);
        model.sample_into(&x, a, rng, out);
    }
    EmpiricalDistribution::from_flat(d, data)
}

/// Regression targets `z = r + scale * y`, `y ~ f_next(x', a')`, `a' ~ pi(x')`;
/// `z = r` when `f_next` is absent.
pub fn build_targets<S: Scalar, M: ConditionalDensity<S> + Sync>(
    subset: &OfflineDataset<S>,
    f_next: Option<&M>,
    scale: S,
    policy: &Policy<S>,
    rng: &RngStream,
) -> Result<RegressionTargets<S>> {
    let meta = subset.meta();
    let d = meta.reward_dim;
    if let Some(f) = f_next {
        if f.reward_dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: f.reward_dim() });
        }
    }
    let positions: Vec<usize> = (0..subset.len()).collect();
    let shards: Vec<Vec<S>> = positions
        .par_chunks(TARGET_SHARD)
        .enumerate()
        .map(|(s, chunk)| {
            let mut srng = rng.derive_indexed("target-shard", s as u64);
            let mut zs = vec![S::zero(); chunk.len() * d];
            let mut y = vec![S::zero(); d];
            for (k, z) in zs.chunks_exact_mut(d).enumerate() {
                let t = subset.get(chunk[k]);
                z.copy_from_slice(&t.r);
                if let Some(f) = f_next {
                    let a = policy.sample(&t.x_next, &mut srng);
                    f.sample_into(&t.x_next, a, &mut srng, &mut y);
                    for j in 0..d {
                        z[j] += scale * y[j];
                    }
                }
            }
            zs
        })
        .collect();
    let mut out = RegressionTargets::with_capacity(meta.obs_dim, d, positions.len());
    for (chunk, zs) in positions.chunks(TARGET_SHARD).zip(&shards) {
        for (&i, z) in chunk.iter().zip(zs.chunks_exact(d)) {
            let t = subset.get(i);
            out.push(&t.x, t.a, z)?;
        }
    }
    Ok(out)
}

/// Targets for step `h` of a finite horizon: `f_next` must be present iff `h < H`.
pub fn build_targets_finite<S: Scalar, M: ConditionalDensity<S> + Sync>(
    subset: &OfflineDataset<S>,
    h: usize,
    horizon: usize,
    f_next: Option<&M>,
    policy: &Policy<S>,
    rng: &RngStream,
) -> Result<RegressionTargets<S>> {
    if h == 0 || h > horizon {
        return Err(Error::InvalidArgument(format!("step {h} outside 1..={horizon}")));
    }
    if (h < horizon) != f_next.is_some() {
        return Err(Error::InvalidArgument(format!("step {h} of {horizon}: next-step model presence mismatch")));
    }
    build_targets(subset, f_next, S::one(), policy, rng)
}

fn check_policy<S: Scalar>(dataset: &OfflineDataset<S>, policy: &Policy<S>) -> Result<()> {
    let na = dataset.meta().num_actions;
    if policy.num_actions() != na {
        return Err(Error::DimensionMismatch { expected: na, got: policy.num_actions() });
    }
    Ok(())
}

/// Finite-horizon FLE: split into `H` subsets and sweep `h = H..1`.
pub fn fle_finite<S: Scalar>(
    dataset: &OfflineDataset<S>,
    cfg: &FleFiniteConfig,
    policy: &Policy<S>,
    rng: &RngStream,
) -> Result<ReturnEstimator<S>> {
    let horizon = cfg.horizon;
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    cfg.model.validate()?;
    check_policy(dataset, policy)?;
    let subsets = match cfg.split {
        SplitMode::ByStep => dataset.split_by_step(horizon)?,
        SplitMode::Random => dataset.split(horizon, &mut rng.derive("split"))?,
    };
    let feature = *policy.feature();
    let na = policy.num_actions();
    let mut models: Vec<Option<FittedModel<S>>> = vec![None; horizon];
    let mut records = Vec::with_capacity(horizon);
    let mut chain: Vec<String> = Vec::new();
    for h in (1..=horizon).rev() {
        let subset = &subsets[h - 1];
        let hash = subset.subset_hash();
        chain.insert(0, hash.clone());
        let step_rng = rng.derive_indexed("step", h as u64);
        let next = models.get(h).and_then(Option::as_ref);
        let targets = build_targets_finite(subset, h, horizon, next, policy, &step_rng.derive("targets"))
            .map_err(|e| e.at_step(h))?;
        let fit = cfg.model.fit(feature, na, &targets, &step_rng.derive("fit")).map_err(|e| e.at_step(h))?;
        log::debug!("fle step {h}: {} targets, avg ll {:.4} -> {:.4}", targets.len(), fit.initial_objective, fit.final_objective);
        records.push(FitRecord {
            index: h,
            num_targets: targets.len(),
            subset_hash: hash,
            depends_on: chain.clone(),
            initial_objective: fit.initial_objective,
            final_objective: fit.final_objective,
        });
        models[h - 1] = Some(fit.model);
    }
    records.reverse();
    Ok(ReturnEstimator { models: models.into_iter().map(Option::unwrap).collect(), records })
}

/// `ceil(ln n / (2 ln(1/gamma)))`, at least 1.
pub fn default_iterations(n: usize, gamma: f64) -> usize {
    if gamma <= 0.0 || n < 2 {
        return 1;
    }
    ((n as f64).ln() / (2.0 * (1.0 / gamma).ln())).ceil().max(1.0) as usize
}

/// Discounted FLE: split into `T` subsets; `f_t` is fitted to `r + gamma * y`,
/// `y ~ f_{t-1}`, starting from a point mass at zero.
pub fn fle_infinite<S: Scalar>(
    dataset: &OfflineDataset<S>,
    cfg: &FleInfiniteConfig,
    policy: &Policy<S>,
    rng: &RngStream,
) -> Result<ReturnEstimator<S>> {
    if !(0.0..1.0).contains(&cfg.gamma) {
        return Err(Error::Config(format!("gamma {} must lie in [0, 1)", cfg.gamma)));
    }
    cfg.model.validate()?;
    check_policy(dataset, policy)?;
    let t_max = cfg.iterations.unwrap_or_else(|| default_iterations(dataset.len(), cfg.gamma));
    if t_max == 0 {
        return Err(Error::Config("need at least one iteration".into()));
    }
    let subsets = dataset.split(t_max, &mut rng.derive("split"))?;
    let feature = *policy.feature();
    let na = policy.num_actions();
    let gamma = S::lit(cfg.gamma);
    let mut current = FittedModel::PointMass(PointMass::zero(dataset.meta().reward_dim));
    let mut records = Vec::with_capacity(t_max);
    let mut chain = Vec::new();
    for (t, subset) in (1..=t_max).zip(&subsets) {
        let hash = subset.subset_hash();
        chain.insert(0, hash.clone());
        let it_rng = rng.derive_indexed("iteration", t as u64);
        let targets = build_targets(subset, Some(&current), gamma, policy, &it_rng.derive("targets")).map_err(|e| e.at_step(t))?;
        let fit = cfg.model.fit(feature, na, &targets, &it_rng.derive("fit")).map_err(|e| e.at_step(t))?;
        records.push(FitRecord {
            index: t,
            num_targets: targets.len(),
            subset_hash: hash,
            depends_on: chain.clone(),
            initial_objective: fit.initial_objective,
            final_objective: fit.final_objective,
        });
        current = fit.model;
    }
    Ok(ReturnEstimator { models: vec![current], records })
}

/// Draws `z ~ f(x, a)` for `m` observations produced by `observe`.
pub fn conditional_model_samples<S: Scalar, M: ConditionalDensity<S>>(
    model: &M,
    mut observe: impl FnMut(&mut RngStream) -> Vec<S>,
    a: ActionId,
    m: usize,
    rng: &mut RngStream,
) -> Result<EmpiricalDistribution<S>> {
    let d = model.reward_dim();
    let mut data = vec![S::zero(); m * d];
    for out in data.chunks_exact_mut(d) {
        let x = observe(rng);
        model.sample_into(&x, a, rng, out);
    }
    EmpiricalDistribution::from_flat(d, data)
}
