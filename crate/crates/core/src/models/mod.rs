//! Conditional return-distribution models `p(z | x, a)`.
//!
//! Every family conditions through a [`FeatureMap`]: one independent parameter
//! set per `(cell, action)` group, fitted by maximum likelihood on that group's
//! targets.

mod categorical;
mod feature;
mod fixed_gaussian;
mod gmm;
mod optim;
mod point;
mod tabular_mixture;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use categorical::{cross_entropy, AtomGrid, CategoricalModel};
pub use feature::FeatureMap;
pub use fixed_gaussian::FixedGaussianModel;
pub use gmm::{gmm_objective, GmmGroup, GmmModel};
pub use optim::{maximize, OptimizeReport, OptimizerConfig, StepRule};
pub use point::{PointMass, QuantileModel};
pub use tabular_mixture::TabularMixtureModel;

use crate::env::RewardDensity;
use crate::mdp::ActionId;
use crate::{Error, Result, RngStream, Scalar};

/// Lower clamp applied to every reported log-density.
pub const LOG_DENSITY_FLOOR: f64 = -30.0;

pub trait ConditionalDensity<S: Scalar> {
    fn reward_dim(&self) -> usize;

    fn sample_into(&self, x: &[S], a: ActionId, rng: &mut RngStream, out: &mut [S]);

    fn sample(&self, x: &[S], a: ActionId, rng: &mut RngStream) -> Vec<S> {
        let mut out = vec![S::zero(); self.reward_dim()];
        self.sample_into(x, a, rng, &mut out);
        out
    }

    /// `log p(z | x, a)`, clamped below at [`LOG_DENSITY_FLOOR`].
    fn log_density(&self, x: &[S], a: ActionId, z: &[S]) -> S;
}

/// Fitted group parameters with the objective before and after.
type GroupFit<T> = Result<(T, (f64, f64))>;

pub(crate) fn floor_log<S: Scalar>(v: S) -> S {
    let f = S::lit(LOG_DENSITY_FLOOR);
    if v.is_nan() || v < f {
        f
    } else {
        v
    }
}

/// Regression pairs `((x, a), z)` stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTargets<S> {
    obs_dim: usize,
    reward_dim: usize,
    xs: Vec<S>,
    actions: Vec<ActionId>,
    zs: Vec<S>,
}

impl<S: Scalar> RegressionTargets<S> {
    pub fn new(obs_dim: usize, reward_dim: usize) -> Self {
        Self { obs_dim, reward_dim, xs: Vec::new(), actions: Vec::new(), zs: Vec::new() }
    }

    pub fn with_capacity(obs_dim: usize, reward_dim: usize, n: usize) -> Self {
        Self {
            obs_dim,
            reward_dim,
            xs: Vec::with_capacity(n * obs_dim),
            actions: Vec::with_capacity(n),
            zs: Vec::with_capacity(n * reward_dim),
        }
    }

    pub fn push(&mut self, x: &[S], a: ActionId, z: &[S]) -> Result<()> {
        if x.len() != self.obs_dim {
            return Err(Error::DimensionMismatch { expected: self.obs_dim, got: x.len() });
        }
        if z.len() != self.reward_dim {
            return Err(Error::DimensionMismatch { expected: self.reward_dim, got: z.len() });
        }
        self.xs.extend_from_slice(x);
        self.actions.push(a);
        self.zs.extend_from_slice(z);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn reward_dim(&self) -> usize {
        self.reward_dim
    }

    pub fn x(&self, i: usize) -> &[S] {
        &self.xs[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn action(&self, i: usize) -> ActionId {
        self.actions[i]
    }

    pub fn z(&self, i: usize) -> &[S] {
        &self.zs[i * self.reward_dim..(i + 1) * self.reward_dim]
    }

    pub fn z_flat(&self) -> &[S] {
        &self.zs
    }

    /// Target indices bucketed by `cell * A + a`.
    pub fn group_indices(&self, feature: &FeatureMap, num_actions: usize) -> Result<Vec<Vec<usize>>> {
        let mut groups = vec![Vec::new(); feature.num_cells() * num_actions];
        for i in 0..self.len() {
            let a = self.actions[i].0;
            if a >= num_actions {
                return Err(Error::InvalidArgument(format!("action {a} out of range {num_actions}")));
            }
            let cell = feature.cell(self.x(i));
            if cell >= feature.num_cells() {
                return Err(Error::InvalidArgument(format!("cell {cell} out of range for {}", feature.id())));
            }
            groups[cell * num_actions + a].push(i);
        }
        Ok(groups)
    }

    /// Flat `z` values of the listed targets.
    pub fn gather_z(&self, idx: &[usize]) -> Vec<S> {
        let mut out = Vec::with_capacity(idx.len() * self.reward_dim);
        for &i in idx {
            out.extend_from_slice(self.z(i));
        }
        out
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(i) = self.zs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: format!("regression target #{}", i / self.reward_dim) });
        }
        Ok(())
    }

    pub fn bounds(&self) -> Option<Bounds<S>> {
        Bounds::enclosing(self.reward_dim, &self.zs)
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds<S> {
    pub lo: Vec<S>,
    pub hi: Vec<S>,
}

impl<S: Scalar> Bounds<S> {
    pub fn enclosing(dim: usize, flat: &[S]) -> Option<Self> {
        if flat.is_empty() {
            return None;
        }
        let mut lo = vec![S::infinity(); dim];
        let mut hi = vec![S::neg_infinity(); dim];
        for z in flat.chunks_exact(dim) {
            for j in 0..dim {
                lo[j] = lo[j].min(z[j]);
                hi[j] = hi[j].max(z[j]);
            }
        }
        Some(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn diameter(&self) -> S {
        self.lo.iter().zip(&self.hi).fold(S::zero(), |acc, (&l, &h)| acc + (h - l) * (h - l)).sqrt()
    }

    /// Grow each side by `frac` of the side length (at least `min_pad`).
    pub fn padded(&self, frac: S, min_pad: S) -> Self {
        let mut out = self.clone();
        for j in 0..self.dim() {
            let pad = ((self.hi[j] - self.lo[j]) * frac).max(min_pad);
            out.lo[j] -= pad;
            out.hi[j] += pad;
        }
        out
    }

    pub fn clip(&self, z: &mut [S]) {
        for j in 0..self.dim() {
            z[j] = z[j].max(self.lo[j]).min(self.hi[j]);
        }
    }

    pub fn contains(&self, z: &[S]) -> bool {
        (0..self.dim()).all(|j| z[j] >= self.lo[j] && z[j] <= self.hi[j])
    }
}

/// What to fit at each regression step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Gmm {
        components: usize,
        optimizer: OptimizerConfig,
    },
    Categorical {
        /// Atoms per reward dimension.
        atoms: Vec<usize>,
        /// Fixed grid range per dimension; the targets' bounding box when absent.
        #[serde(default)]
        range: Option<Vec<[f64; 2]>>,
        optimizer: OptimizerConfig,
    },
    FixedGaussian {
        sigma: f64,
        optimizer: OptimizerConfig,
    },
    TabularMixture {
        dictionary: Vec<RewardDensity>,
        optimizer: OptimizerConfig,
    },
}

/// Fitted model plus the average training log-likelihood before and after optimization.
#[derive(Debug, Clone)]
pub struct FitOutcome<S> {
    pub model: FittedModel<S>,
    pub initial_objective: f64,
    pub final_objective: f64,
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Gmm { .. } => "gmm",
            ModelSpec::Categorical { .. } => "categorical",
            ModelSpec::FixedGaussian { .. } => "fixed-gaussian",
            ModelSpec::TabularMixture { .. } => "tabular-mixture",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Gmm { components, optimizer } => {
                if *components == 0 {
                    return Err(Error::Config("gmm needs at least one component".into()));
                }
                optimizer.validate()
            }
            ModelSpec::Categorical { atoms, range, optimizer } => {
                if atoms.is_empty() || atoms.contains(&0) {
                    return Err(Error::Config("categorical grid needs at least one atom per dimension".into()));
                }
                if let Some(r) = range {
                    if r.len() != atoms.len() || r.iter().any(|[lo, hi]| !(hi >= lo)) {
                        return Err(Error::Config("categorical range must be one [lo, hi] per dimension".into()));
                    }
                }
                optimizer.validate()
            }
            ModelSpec::FixedGaussian { sigma, optimizer } => {
                if !(*sigma > 0.0) {
                    return Err(Error::Config("fixed gaussian sigma must be positive".into()));
                }
                optimizer.validate()
            }
            ModelSpec::TabularMixture { dictionary, optimizer } => {
                if dictionary.is_empty() {
                    return Err(Error::Config("mixture dictionary is empty".into()));
                }
                dictionary.iter().try_for_each(RewardDensity::validate)?;
                optimizer.validate()
            }
        }
    }

    /// Maximum-likelihood fit, one independent problem per `(cell, action)` group.
    /// Groups without data keep their initialization.
    pub fn fit<S: Scalar>(
        &self,
        feature: FeatureMap,
        num_actions: usize,
        targets: &RegressionTargets<S>,
        rng: &RngStream,
    ) -> Result<FitOutcome<S>> {
        self.validate()?;
        targets.check_finite()?;
        let groups = targets.group_indices(&feature, num_actions)?;
        let d = targets.reward_dim();
        let total = targets.len().max(1) as f64;

        // Each group returns (initial sum LL, final sum LL).
        fn weigh(reports: &[(f64, f64)], total: f64) -> (f64, f64) {
            let (a, b) = reports.iter().fold((0.0, 0.0), |acc, r| (acc.0 + r.0, acc.1 + r.1));
            (a / total, b / total)
        }

        match self {
            ModelSpec::Gmm { components, optimizer } => {
                let bounds = targets.bounds().unwrap_or(Bounds { lo: vec![S::zero(); d], hi: vec![S::one(); d] });
                let floor = (bounds.diameter() * S::lit(1e-3)).max(S::lit(1e-6));
                let fitted: Vec<GroupFit<GmmGroup<S>>> = groups
                    .par_iter()
                    .enumerate()
                    .map(|(g, idx)| {
                        let data = targets.gather_z(idx);
                        let mut grng = rng.derive_indexed("gmm-group", g as u64);
                        gmm::fit_group(&data, d, *components, floor, &bounds, optimizer, &mut grng)
                            .map_err(|e| Error::Validation(format!("group {g}: {e}")))
                    })
                    .collect();
                let mut params = Vec::with_capacity(fitted.len());
                let mut reports = Vec::with_capacity(fitted.len());
                for f in fitted {
                    let (p, r) = f?;
                    params.push(p);
                    reports.push(r);
                }
                let (initial_objective, final_objective) = weigh(&reports, total);
                let sample_box = bounds.padded(S::lit(0.1), floor);
                let model = GmmModel::new(feature, num_actions, d, *components, floor, sample_box, params)?;
                Ok(FitOutcome { model: FittedModel::Gmm(model), initial_objective, final_objective })
            }
            ModelSpec::Categorical { atoms, range, optimizer } => {
                if atoms.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: atoms.len() });
                }
                let (lo, hi) = match range {
                    Some(r) => (r.iter().map(|v| S::lit(v[0])).collect(), r.iter().map(|v| S::lit(v[1])).collect()),
                    None => {
                        let b = targets
                            .bounds()
                            .ok_or_else(|| Error::InvalidArgument("categorical grid needs data or a range".into()))?;
                        (b.lo, b.hi)
                    }
                };
                let grid = AtomGrid::new(atoms.clone(), lo, hi)?;
                let fitted: Vec<GroupFit<Vec<S>>> = groups
                    .par_iter()
                    .map(|idx| categorical::fit_group(&grid, targets, idx, optimizer))
                    .collect();
                let mut logits = Vec::with_capacity(fitted.len());
                let mut reports = Vec::with_capacity(fitted.len());
                for f in fitted {
                    let (l, r) = f?;
                    logits.push(l);
                    reports.push(r);
                }
                let (initial_objective, final_objective) = weigh(&reports, total);
                let model = CategoricalModel::from_logits(feature, num_actions, grid, logits)?;
                Ok(FitOutcome { model: FittedModel::Categorical(model), initial_objective, final_objective })
            }
            ModelSpec::FixedGaussian { sigma, optimizer } => {
                let sigma = S::lit(*sigma);
                let mut means = Vec::with_capacity(groups.len());
                let mut reports = Vec::with_capacity(groups.len());
                for idx in &groups {
                    let (m, r) = fixed_gaussian::fit_group(&targets.gather_z(idx), d, sigma, optimizer)?;
                    means.push(m);
                    reports.push(r);
                }
                let (initial_objective, final_objective) = weigh(&reports, total);
                let model = FixedGaussianModel::new(feature, num_actions, d, sigma, means)?;
                Ok(FitOutcome { model: FittedModel::FixedGaussian(model), initial_objective, final_objective })
            }
            ModelSpec::TabularMixture { dictionary, optimizer } => {
                if d != 1 {
                    return Err(Error::UnsupportedDimension { dim: d, reason: "mixture dictionaries are scalar" });
                }
                let mut weights = Vec::with_capacity(groups.len());
                let mut reports = Vec::with_capacity(groups.len());
                for idx in &groups {
                    let (w, r) = tabular_mixture::fit_group(dictionary, &targets.gather_z(idx), optimizer)?;
                    weights.push(w);
                    reports.push(r);
                }
                let (initial_objective, final_objective) = weigh(&reports, total);
                let model = TabularMixtureModel::new(feature, num_actions, dictionary.clone(), weights)?;
                Ok(FitOutcome { model: FittedModel::TabularMixture(model), initial_objective, final_objective })
            }
        }
    }
}

/// Any fitted conditional return model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FittedModel<S> {
    Gmm(GmmModel<S>),
    Categorical(CategoricalModel<S>),
    FixedGaussian(FixedGaussianModel<S>),
    TabularMixture(TabularMixtureModel<S>),
    Quantile(QuantileModel<S>),
    PointMass(PointMass<S>),
}

impl<S: Scalar> FittedModel<S> {
    pub fn family(&self) -> &'static str {
        match self {
            FittedModel::Gmm(_) => "gmm",
            FittedModel::Categorical(_) => "categorical",
            FittedModel::FixedGaussian(_) => "fixed-gaussian",
            FittedModel::TabularMixture(_) => "tabular-mixture",
            FittedModel::Quantile(_) => "quantile",
            FittedModel::PointMass(_) => "point-mass",
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut m: Self = serde_json::from_str(s)?;
        if let FittedModel::Categorical(c) = &mut m {
            c.rebuild_cache()?;
        }
        Ok(m)
    }

    fn inner(&self) -> &dyn ConditionalDensity<S> {
        match self {
            FittedModel::Gmm(m) => m,
            FittedModel::Categorical(m) => m,
            FittedModel::FixedGaussian(m) => m,
            FittedModel::TabularMixture(m) => m,
            FittedModel::Quantile(m) => m,
            FittedModel::PointMass(m) => m,
        }
    }
}

impl<S: Scalar> ConditionalDensity<S> for FittedModel<S> {
    fn reward_dim(&self) -> usize {
        self.inner().reward_dim()
    }

    fn sample_into(&self, x: &[S], a: ActionId, rng: &mut RngStream, out: &mut [S]) {
        self.inner().sample_into(x, a, rng, out)
    }

    fn log_density(&self, x: &[S], a: ActionId, z: &[S]) -> S {
        self.inner().log_density(x, a, z)
    }
}

pub(crate) fn group_of<S: Scalar>(feature: &FeatureMap, num_actions: usize, x: &[S], a: ActionId) -> usize {
    feature.cell(x) * num_actions + a.0
}

pub(crate) fn check_groups<T>(feature: &FeatureMap, num_actions: usize, groups: &[T]) -> Result<()> {
    let expected = feature.num_cells() * num_actions;
    if groups.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: groups.len() });
    }
    Ok(())
}
