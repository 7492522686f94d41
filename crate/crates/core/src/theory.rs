//! Executable versions of the theoretical statements on small tabular
//! instances: coverage, oracle equivalence, error rates, contraction,
//! TV dominance, CVaR Lipschitzness, the Bellman fixed point, the FQE
//! reduction and the discounted sanity checks.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::fqe_least_squares;
use crate::env::{RewardDensity, TabularMdp};
use crate::fle::{fle_finite, fle_infinite, FleFiniteConfig, FleInfiniteConfig, ReturnEstimator, SplitMode};
use crate::mdp::{monte_carlo_returns, ActionId, Horizon, Policy};
use crate::metrics::{
    apply_bellman, bin_masses, check_contraction, check_cvar_lipschitz_exact, check_tv_dominance, tv_against_masses,
    tv_density_1d, wasserstein1_1d, DiscreteLaw, HistogramSpec,
};
use crate::models::{
    FittedModel, ModelSpec, OptimizerConfig, QuantileModel, TabularMixtureModel,
};
use crate::{Error, Result, RngStream, Scalar};

/// Density-ratio coverage constant `max_{h,x,a} d^pi_h(x,a) / rho(x,a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageEstimate {
    /// `f64::INFINITY` when `rho` misses a visited pair.
    pub value: f64,
    pub step: usize,
    pub pair: usize,
}

impl CoverageEstimate {
    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

/// `rho` holds one distribution over `x * A + a` per step, or a single row shared by all steps.
pub fn coverage_constant_tabular<S: Scalar>(mdp: &TabularMdp, policy: &Policy<S>, rho: &[Vec<f64>]) -> Result<CoverageEstimate> {
    let occupancy: Vec<Vec<f64>> = match crate::mdp::Environment::<S>::horizon(mdp) {
        Horizon::Finite { steps } => mdp
            .occupancy_finite(policy, steps)
            .into_iter()
            .map(|d| d.into_iter().map(|v| v.as_f64()).collect())
            .collect(),
        Horizon::Discounted { gamma } => {
            vec![mdp.occupancy_discounted(policy, S::lit(gamma)).into_iter().map(|v| v.as_f64()).collect()]
        }
    };
    if rho.is_empty() || (rho.len() != 1 && rho.len() != occupancy.len()) {
        return Err(Error::InvalidArgument("rho needs one row or one row per step".into()));
    }
    let mut best = CoverageEstimate { value: 0.0, step: 1, pair: 0 };
    for (h, d) in occupancy.iter().enumerate() {
        let r = if rho.len() == 1 { &rho[0] } else { &rho[h] };
        if r.len() != d.len() {
            return Err(Error::DimensionMismatch { expected: d.len(), got: r.len() });
        }
        for (i, (&dv, &rv)) in d.iter().zip(r).enumerate() {
            if dv <= 0.0 {
                continue;
            }
            let ratio = if rv > 0.0 { dv / rv } else { f64::INFINITY };
            if ratio > best.value {
                best = CoverageEstimate { value: ratio, step: h + 1, pair: i };
            }
        }
    }
    Ok(best)
}

/// One line of `theory_report.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryRow {
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

impl TheoryRow {
    /// Row for `lhs <= rhs`.
    pub fn at_most(check: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self { check: check.into(), lhs, rhs, margin: rhs - lhs, pass: lhs <= rhs }
    }

    /// Row for `lhs >= rhs` (used for pass counts).
    pub fn at_least(check: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self { check: check.into(), lhs, rhs, margin: lhs - rhs, pass: lhs >= rhs }
    }
}

pub fn write_theory_report(rows: &[TheoryRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Evaluation policy used on the reference four-state instance.
pub fn reference_policy(mdp: &TabularMdp) -> Policy<f64> {
    let probs = vec![vec![0.6, 0.4], vec![0.3, 0.7], vec![0.5, 0.5], vec![0.9, 0.1]];
    Policy::tabular(mdp.feature_map(), probs).expect("valid reference policy")
}

fn default_mixture_optimizer() -> OptimizerConfig {
    OptimizerConfig::adam(0.05, 2000).with_early_stop(1e-10, 20)
}

/// FLE model class that contains the exact return laws of a sparse-reward tabular MDP.
pub fn tabular_mixture_spec(mdp: &TabularMdp, optimizer: OptimizerConfig) -> ModelSpec {
    ModelSpec::TabularMixture { dictionary: mdp.reward_laws().to_vec(), optimizer }
}

fn mixture_breaks(dict: &[RewardDensity]) -> (f64, f64, Vec<f64>) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut breaks = Vec::new();
    for d in dict {
        let (a, b) = d.effective_support();
        lo = lo.min(a);
        hi = hi.max(b);
        if let RewardDensity::Uniform { low, high } = *d {
            breaks.extend([low, high]);
        }
    }
    (lo, hi, breaks)
}

fn finite_steps(mdp: &TabularMdp) -> Result<usize> {
    crate::mdp::Environment::<f64>::horizon(mdp)
        .steps()
        .ok_or_else(|| Error::InvalidArgument("needs a finite horizon".into()))
}

fn mix_pdf(dict: &[RewardDensity], w: &[f64], z: f64) -> f64 {
    dict.iter().zip(w).map(|(d, &w)| w * d.pdf::<f64>(z)).sum()
}

/// Exact TV between `E_{x~mu, a~pi} f_1(x, a)` and the true return law, for a
/// mixture estimator over the MDP's reward laws.
pub fn tabular_tv_error(mdp: &TabularMdp, policy: &Policy<f64>, est: &ReturnEstimator<f64>) -> Result<f64> {
    let FittedModel::TabularMixture(model) = est.model(1) else {
        return Err(Error::InvalidArgument("tabular TV error needs a mixture estimator".into()));
    };
    let truth = mdp.exact_initial_weights(policy)?;
    let mut fitted = vec![0.0; truth.len()];
    for (x, &mu) in mdp.initial_distribution().iter().enumerate() {
        let obs: Vec<f64> = mdp.one_hot(x);
        for (a, &pa) in policy.probs(&obs).iter().enumerate() {
            for (f, &w) in fitted.iter_mut().zip(model.weights(&obs, ActionId(a))) {
                *f += mu * pa * w;
            }
        }
    }
    let dict = model.dictionary();
    let (lo, hi, breaks) = mixture_breaks(dict);
    Ok(tv_density_1d(|z| mix_pdf(dict, &fitted, z), |z| mix_pdf(dict, &truth, z), lo, hi, &breaks, 20_000))
}

/// One FLE run on `n` uniform tuples of the reference instance; returns its exact TV error.
pub fn tabular_fle_error(mdp: &TabularMdp, policy: &Policy<f64>, n: usize, seed: u64, optimizer: &OptimizerConfig) -> Result<f64> {
    let steps = finite_steps(mdp)?;
    let rng = RngStream::new(seed);
    let data = mdp.generate_uniform_dataset::<f64>(n, &mut rng.derive("data"))?;
    let cfg = FleFiniteConfig { horizon: steps, model: tabular_mixture_spec(mdp, optimizer.clone()), split: SplitMode::ByStep };
    let est = fle_finite(&data, &cfg, policy, &rng.derive("fle"))?;
    tabular_tv_error(mdp, policy, &est)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub errors: Vec<f64>,
    pub median: f64,
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

/// Median-over-seeds TV error of tabular FLE for each dataset size.
pub fn error_rate_sweep(
    mdp: &TabularMdp,
    policy: &Policy<f64>,
    optimizer: &OptimizerConfig,
    n_list: &[usize],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    n_list
        .iter()
        .map(|&n| {
            let errors = seeds
                .par_iter()
                .map(|&s| tabular_fle_error(mdp, policy, n, s.wrapping_mul(1_000_003).wrapping_add(n as u64), optimizer))
                .collect::<Result<Vec<_>>>()?;
            let median = median(&errors);
            Ok(SweepRow { n, errors, median })
        })
        .collect()
}

/// Random point-mass-valued conditional model: one value per `(x, a)`.
fn random_point_model(mdp: &TabularMdp, scale: f64, rng: &mut RngStream) -> Result<QuantileModel<f64>> {
    let groups = mdp.num_pairs();
    let locations = (0..groups).map(|_| vec![scale * f64::unit(rng)]).collect();
    QuantileModel::new(mdp.feature_map(), crate::mdp::Environment::<f64>::num_actions(mdp), locations)
}

/// Contraction of the discounted operator on random point-mass pairs over random
/// 3-state MDPs; counts how many pairs pass for each `(p, gamma)`.
pub fn contraction_suite(pairs: usize, m: usize, seed: u64) -> Result<Vec<TheoryRow>> {
    let mut rows = Vec::new();
    for gamma in [0.5, 0.9] {
        for p in [1.0, 2.0] {
            let passed = (0..pairs)
                .into_par_iter()
                .map(|i| -> Result<bool> {
                    let mut rng = RngStream::new(seed).derive_indexed(&format!("contraction-{gamma}-{p}"), i as u64);
                    let mdp = TabularMdp::random(3, 2, Horizon::Discounted { gamma }, &mut rng)?;
                    let policy = random_policy(&mdp, &mut rng)?;
                    let scale = 1.0 / (1.0 - gamma);
                    let f = random_point_model(&mdp, scale, &mut rng)?;
                    let g = random_point_model(&mdp, scale, &mut rng)?;
                    Ok(check_contraction(&mdp, &policy, &f, &g, p, m, 0.1, &rng.derive("check"))?.pass)
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .filter(|&b| b)
                .count();
            let need = (pairs as f64 * 0.95).ceil();
            rows.push(TheoryRow::at_least(format!("contraction p={p} gamma={gamma} (pairs passing)"), passed as f64, need));
        }
    }
    Ok(rows)
}

fn random_policy(mdp: &TabularMdp, rng: &mut RngStream) -> Result<Policy<f64>> {
    let na = crate::mdp::Environment::<f64>::num_actions(mdp);
    let probs = (0..mdp.num_states())
        .map(|_| {
            let w: Vec<f64> = (0..na).map(|_| f64::unit(rng) + 0.05).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|v| v / s).collect()
        })
        .collect();
    Policy::tabular(mdp.feature_map(), probs)
}

fn random_support(k: usize, dim: usize, scale: f64, rng: &mut RngStream) -> Vec<Vec<f64>> {
    (0..k).map(|_| (0..dim).map(|_| scale * f64::unit(rng)).collect()).collect()
}

fn diameter(support: &[Vec<f64>]) -> f64 {
    let mut best: f64 = 0.0;
    for a in support {
        for b in support {
            best = best.max(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt());
        }
    }
    best
}

/// `W_p^p <= diam^p TV` on random exact discrete pairs with up to 8 shared atoms.
pub fn dominance_suite(pairs: usize, seed: u64) -> Result<Vec<TheoryRow>> {
    let mut rows = Vec::new();
    for p in [1.0, 2.0, 3.0] {
        let mut rng = RngStream::new(seed).derive(&format!("dominance-{p}"));
        let mut passed = 0;
        for i in 0..pairs {
            let k = 1 + rng.index(8);
            let dim = 1 + i % 2;
            let support = random_support(k, dim, 3.0, &mut rng);
            let a = DiscreteLaw::random_on(&support, &mut rng);
            let b = DiscreteLaw::random_on(&support, &mut rng);
            passed += usize::from(check_tv_dominance(&a, &b, p, diameter(&support))?.pass);
        }
        rows.push(TheoryRow::at_least(format!("tv dominance p={p} (pairs passing)"), passed as f64, pairs as f64));
    }
    Ok(rows)
}

/// CVaR Lipschitz bound on random exact discrete pairs in `[0, H]`.
pub fn cvar_lipschitz_suite(pairs: usize, h_max: f64, seed: u64) -> Result<Vec<TheoryRow>> {
    let mut rows = Vec::new();
    for tau in [0.1, 0.5, 1.0] {
        let mut rng = RngStream::new(seed).derive(&format!("cvar-{tau}"));
        let mut passed = 0;
        for _ in 0..pairs {
            let k = 1 + rng.index(8);
            let support = random_support(k, 1, h_max, &mut rng);
            let a = DiscreteLaw::random_on(&support, &mut rng);
            let other = random_support(1 + rng.index(8), 1, h_max, &mut rng);
            let mut joint = support.clone();
            joint.extend(other);
            let b = DiscreteLaw::random_on(&joint, &mut rng);
            passed += usize::from(check_cvar_lipschitz_exact(&a, &b, tau, h_max)?.pass);
        }
        rows.push(TheoryRow::at_least(format!("cvar lipschitz tau={tau} (pairs passing)"), passed as f64, pairs as f64));
    }
    Ok(rows)
}

/// `T^pi Z_{h+1} = Z_h`: histogram TV between Bellman-image samples and the exact
/// law, maximized over `(x, a)`, for each step.
pub fn bellman_fixed_point_suite(mdp: &TabularMdp, policy: &Policy<f64>, m: usize, bins: usize, seed: u64) -> Result<Vec<TheoryRow>> {
    let steps = finite_steps(mdp)?;
    let exact = mdp.exact_return_models(policy)?;
    let dict = mdp.reward_laws();
    let (lo, hi, _) = mixture_breaks(dict);
    let spec = HistogramSpec::uniform(1, bins, lo, hi)?;
    let na = crate::mdp::Environment::<f64>::num_actions(mdp);
    let mut rows = Vec::new();
    for h in 1..=steps {
        let next: Option<&TabularMixtureModel<f64>> = exact.get(h);
        let worst = (0..mdp.num_pairs())
            .into_par_iter()
            .map(|pair| -> Result<f64> {
                let (x, a) = (pair / na, ActionId(pair % na));
                let mut rng = RngStream::new(seed).derive_indexed(&format!("bellman-{h}"), pair as u64);
                let samples = apply_bellman(next, mdp, policy, &x, h, a, 1.0, m, &mut rng)?;
                let obs: Vec<f64> = mdp.one_hot(x);
                let w = exact[h - 1].weights(&obs, a).to_vec();
                let masses = bin_masses(|z| mix_pdf(dict, &w, z), &spec, None)?;
                tv_against_masses(&samples, &masses, &spec)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        rows.push(TheoryRow::at_most(format!("bellman fixed point h={h} (max tv)"), worst, 0.02));
    }
    Ok(rows)
}

/// Fixed-variance Gaussian FLE against independent least-squares FQE, under a
/// deterministic policy; returns the largest per-cell mean difference.
pub fn fqe_reduction_gap(mdp: &TabularMdp, n: usize, seed: u64) -> Result<f64> {
    let steps = finite_steps(mdp)?;
    let na = crate::mdp::Environment::<f64>::num_actions(mdp);
    let actions: Vec<usize> = (0..mdp.num_states()).map(|x| x % na).collect();
    let policy = Policy::deterministic(mdp.feature_map(), &actions, na)?;
    let rng = RngStream::new(seed);
    let data = mdp.generate_uniform_dataset::<f64>(n, &mut rng.derive("data"))?;
    let sigma = 1e-9;
    let cfg = FleFiniteConfig {
        horizon: steps,
        model: ModelSpec::FixedGaussian { sigma, optimizer: OptimizerConfig::gradient(sigma * sigma, 5) },
        split: SplitMode::ByStep,
    };
    let est = fle_finite(&data, &cfg, &policy, &rng.derive("fle"))?;
    let fqe = fqe_least_squares(&data, steps, SplitMode::ByStep, &policy, &rng)?;
    let mut gap: f64 = 0.0;
    for h in 1..=steps {
        let FittedModel::FixedGaussian(m) = est.model(h) else { unreachable!() };
        for (g, (mean, q)) in m.group_means().iter().zip(&fqe.q[h - 1]).enumerate() {
            if q.is_nan() {
                continue;
            }
            let diff = (mean[0] - q).abs();
            if !(diff <= gap) {
                log::debug!("fqe gap h={h} group={g}: {diff}");
            }
            gap = gap.max(diff);
        }
    }
    Ok(gap)
}

/// Grid of uniform boxes on `[lo, hi]` as a mixture dictionary.
pub fn box_dictionary(lo: f64, hi: f64, boxes: usize) -> Vec<RewardDensity> {
    let w = (hi - lo) / boxes as f64;
    (0..boxes).map(|k| RewardDensity::Uniform { low: lo + k as f64 * w, high: lo + (k + 1) as f64 * w }).collect()
}

/// Evaluation policy used on the two-state discounted instance.
pub fn two_state_policy(mdp: &TabularMdp) -> Policy<f64> {
    Policy::tabular(mdp.feature_map(), vec![vec![0.7, 0.3], vec![0.4, 0.6]]).expect("valid policy")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfiniteOutcome {
    pub w1: f64,
    pub bound: f64,
}

/// Discounted FLE with a box-mixture class on the two-state instance, compared
/// with truncated Monte-Carlo returns in `W_1`.
pub fn infinite_horizon_w1(gamma: f64, iterations: usize, per_iteration: usize, boxes: usize, samples: usize, seed: u64) -> Result<InfiniteOutcome> {
    let mdp = TabularMdp::reference_two_state(gamma)?;
    let policy = two_state_policy(&mdp);
    let rng = RngStream::new(seed);
    let data = mdp.generate_uniform_dataset::<f64>(iterations * per_iteration, &mut rng.derive("data"))?;
    let cfg = FleInfiniteConfig {
        gamma,
        iterations: Some(iterations),
        model: ModelSpec::TabularMixture { dictionary: box_dictionary(0.0, 1.0 / (1.0 - gamma), boxes), optimizer: default_mixture_optimizer() },
    };
    let est = fle_infinite(&data, &cfg, &policy, &rng.derive("fle"))?;
    let fitted = est.sample(&mdp, &policy, samples, &mut rng.derive("estimator"))?;
    let truth = monte_carlo_returns(&mdp, &policy, samples, &mut rng.derive("truth"))?;
    let w1 = wasserstein1_1d(&fitted, &truth, &mut rng.derive("w1"))?;
    Ok(InfiniteOutcome { w1, bound: 0.05 / (1.0 - gamma) })
}

/// With `gamma = 0` discounted FLE reduces to one reward-density fit; exact TV
/// to the one-step reward law (averaged under `mu` and `pi`).
pub fn infinite_horizon_gamma_zero_tv(n: usize, boxes: usize, seed: u64) -> Result<f64> {
    let mdp = TabularMdp::reference_two_state(0.0)?;
    let policy = two_state_policy(&mdp);
    let rng = RngStream::new(seed);
    let data = mdp.generate_uniform_dataset::<f64>(n, &mut rng.derive("data"))?;
    let dict = box_dictionary(0.0, 1.0, boxes);
    let cfg = FleInfiniteConfig {
        gamma: 0.0,
        iterations: Some(1),
        model: ModelSpec::TabularMixture { dictionary: dict.clone(), optimizer: default_mixture_optimizer() },
    };
    let est = fle_infinite(&data, &cfg, &policy, &rng.derive("fle"))?;
    let FittedModel::TabularMixture(model) = est.model(1) else { unreachable!() };
    let laws = mdp.reward_laws();
    let na = crate::mdp::Environment::<f64>::num_actions(&mdp);
    let mut fitted = vec![0.0; dict.len()];
    let mut truth = vec![0.0; laws.len()];
    for (x, &mu) in mdp.initial_distribution().iter().enumerate() {
        let obs: Vec<f64> = mdp.one_hot(x);
        for (a, &pa) in policy.probs(&obs).iter().enumerate() {
            truth[x * na + a] += mu * pa;
            for (f, &w) in fitted.iter_mut().zip(model.weights(&obs, ActionId(a))) {
                *f += mu * pa * w;
            }
        }
    }
    let mut breaks: Vec<f64> = dict.iter().flat_map(|d| [d.effective_support().0, d.effective_support().1]).collect();
    breaks.extend(laws.iter().flat_map(|d| [d.effective_support().0, d.effective_support().1]));
    Ok(tv_density_1d(|z| mix_pdf(&dict, &fitted, z), |z| mix_pdf(laws, &truth, z), -0.1, 1.1, &breaks, 20_000))
}

/// Sizes and seeds for the whole theory suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryConfig {
    pub seeds: Vec<u64>,
    pub contraction_pairs: usize,
    pub contraction_samples: usize,
    pub dominance_pairs: usize,
    pub cvar_pairs: usize,
    pub bellman_samples: usize,
    pub bellman_bins: usize,
    /// `(n, tv bound)` pairs for the oracle-equivalence check.
    pub oracle_sizes: Vec<(usize, f64)>,
    pub sweep_sizes: Vec<usize>,
    pub fqe_samples: usize,
    pub infinite_iterations: usize,
    pub infinite_per_iteration: usize,
    pub infinite_boxes: usize,
    pub infinite_samples: usize,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            seeds: vec![1, 2, 3, 4, 5],
            contraction_pairs: 100,
            contraction_samples: 128,
            dominance_pairs: 200,
            cvar_pairs: 100,
            bellman_samples: 100_000,
            bellman_bins: 40,
            oracle_sizes: vec![(20_000, 0.12), (200_000, 0.05)],
            sweep_sizes: vec![5_000, 20_000, 80_000],
            fqe_samples: 20_000,
            infinite_iterations: 40,
            infinite_per_iteration: 2_000,
            infinite_boxes: 40,
            infinite_samples: 20_000,
        }
    }
}

pub fn oracle_equivalence_rows(cfg: &TheoryConfig) -> Result<Vec<TheoryRow>> {
    let mdp = TabularMdp::reference_four_state();
    let policy = reference_policy(&mdp);
    let opt = default_mixture_optimizer();
    let mut rows = Vec::new();
    for &(n, bound) in &cfg.oracle_sizes {
        let errors = cfg
            .seeds
            .par_iter()
            .map(|&s| tabular_fle_error(&mdp, &policy, n, s.wrapping_mul(7919).wrapping_add(n as u64), &opt))
            .collect::<Result<Vec<_>>>()?;
        let ok = errors.iter().filter(|&&e| e <= bound).count();
        log::info!("oracle equivalence n={n}: errors {errors:?}");
        let need = (cfg.seeds.len() / 2 + 1) as f64;
        rows.push(TheoryRow::at_least(format!("oracle equivalence n={n} tv<={bound} (seeds passing)"), ok as f64, need));
    }
    Ok(rows)
}

pub fn error_monotonicity_rows(cfg: &TheoryConfig) -> Result<Vec<TheoryRow>> {
    let mdp = TabularMdp::reference_four_state();
    let policy = reference_policy(&mdp);
    let sweep = error_rate_sweep(&mdp, &policy, &default_mixture_optimizer(), &cfg.sweep_sizes, &cfg.seeds)?;
    let mut rows = Vec::new();
    for w in sweep.windows(2) {
        rows.push(TheoryRow::at_most(
            format!("median tv error n={} vs n={}", w[1].n, w[0].n),
            w[1].median,
            w[0].median,
        ));
    }
    Ok(rows)
}

pub fn run_theory_suite(cfg: &TheoryConfig) -> Result<Vec<TheoryRow>> {
    let seed = cfg.seeds.first().copied().unwrap_or(0);
    let mdp = TabularMdp::reference_four_state();
    let policy = reference_policy(&mdp);
    let mut rows = Vec::new();
    rows.extend(oracle_equivalence_rows(cfg)?);
    rows.extend(contraction_suite(cfg.contraction_pairs, cfg.contraction_samples, seed)?);
    rows.extend(dominance_suite(cfg.dominance_pairs, seed)?);
    rows.extend(cvar_lipschitz_suite(cfg.cvar_pairs, 3.0, seed)?);
    rows.extend(bellman_fixed_point_suite(&mdp, &policy, cfg.bellman_samples, cfg.bellman_bins, seed)?);
    rows.push(TheoryRow::at_most("fqe reduction (max mean gap)", fqe_reduction_gap(&mdp, cfg.fqe_samples, seed)?, 1e-6));
    rows.extend(error_monotonicity_rows(cfg)?);
    let inf = infinite_horizon_w1(0.9, cfg.infinite_iterations, cfg.infinite_per_iteration, cfg.infinite_boxes, cfg.infinite_samples, seed)?;
    rows.push(TheoryRow::at_most("discounted fle gamma=0.9 (w1)", inf.w1, inf.bound));
    let tv0 = infinite_horizon_gamma_zero_tv(cfg.infinite_per_iteration * 10, 20, seed)?;
    rows.push(TheoryRow::at_most("discounted fle gamma=0 (tv to reward law)", tv0, 0.03));
    let coverage = coverage_constant_tabular(&mdp, &policy, &[vec![1.0 / mdp.num_pairs() as f64; mdp.num_pairs()]])?;
    rows.push(TheoryRow::at_least("coverage constant under uniform rho (>= 1)", coverage.value, 1.0));
    Ok(rows)
}

pub fn print_rows(rows: &[TheoryRow], mut out: impl Write) -> std::io::Result<()> {
    for r in rows {
        writeln!(out, "{:<55} lhs={:<12.6} rhs={:<12.6} {}", r.check, r.lhs, r.rhs, if r.pass { "PASS" } else { "FAIL" })?;
    }
    Ok(())
}
