use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::step_subsets;
use crate::fle::{FitRecord, ReturnEstimator, SplitMode};
use crate::mdp::{ActionId, OfflineDataset, Policy};
use crate::models::{maximize, AtomGrid, CategoricalModel, FittedModel, OptimizerConfig};
use crate::{Error, Result, RngStream, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoricalTdConfig {
    pub horizon: usize,
    /// Atoms per reward dimension.
    pub atoms: Vec<usize>,
    /// `[lo, hi]` per reward dimension.
    pub range: Vec<[f64; 2]>,
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub split: SplitMode,
}

/// Backward per-step categorical TD. The target for `(x, a, r, x')` is the
/// projection of `r + Y`, with `Y` the next step's full categorical law at
/// `x'` mixed over `pi(x')`; each step minimizes the cross-entropy to the
/// per-cell average target.
pub fn categorical_td_run<S: Scalar>(
    dataset: &OfflineDataset<S>,
    cfg: &CategoricalTdConfig,
    policy: &Policy<S>,
    rng: &RngStream,
) -> Result<ReturnEstimator<S>> {
    let d = dataset.meta().reward_dim;
    if cfg.atoms.len() != d || cfg.range.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: cfg.atoms.len() });
    }
    cfg.optimizer.validate()?;
    let grid = AtomGrid::new(
        cfg.atoms.clone(),
        cfg.range.iter().map(|r| S::lit(r[0])).collect(),
        cfg.range.iter().map(|r| S::lit(r[1])).collect(),
    )?;
    let subsets = step_subsets(dataset, cfg.horizon, cfg.split, policy, rng)?;
    let feature = *policy.feature();
    let na = policy.num_actions();
    let num_groups = feature.num_cells() * na;
    let natoms = grid.num_atoms();
    let atoms: Vec<Vec<S>> = (0..natoms).map(|i| grid.atom(i)).collect();

    let mut models: Vec<Option<FittedModel<S>>> = vec![None; cfg.horizon];
    let mut records = Vec::with_capacity(cfg.horizon);
    let mut chain = Vec::new();
    for h in (1..=cfg.horizon).rev() {
        let subset = &subsets[h - 1];
        let hash = subset.subset_hash();
        chain.insert(0, hash.clone());
        let next = match models.get(h).and_then(Option::as_ref) {
            Some(FittedModel::Categorical(m)) => Some(m),
            _ => None,
        };

        // average projected target per group
        let mut q = vec![vec![S::zero(); natoms]; num_groups];
        let mut counts = vec![0usize; num_groups];
        let mut next_cache: HashMap<usize, Vec<(usize, S)>> = HashMap::new();
        let mut buf = Vec::with_capacity(1 << d);
        let mut z = vec![S::zero(); d];
        for t in subset.iter() {
            if t.a.0 >= na {
                return Err(Error::InvalidArgument(format!("action {} out of range", t.a.0)).at_step(h));
            }
            let g = feature.cell(&t.x) * na + t.a.0;
            counts[g] += 1;
            let row = &mut q[g];
            match next {
                None => {
                    buf.clear();
                    grid.project(&t.r, S::one(), &mut buf);
                    for &(i, w) in &buf {
                        row[i] += w;
                    }
                }
                Some(m) => {
                    let cell = feature.cell(&t.x_next);
                    let mix = next_cache.entry(cell).or_insert_with(|| next_cell_law(m, policy, &t.x_next, natoms));
                    for &(j, pj) in mix.iter() {
                        for k in 0..d {
                            z[k] = t.r[k] + atoms[j][k];
                        }
                        buf.clear();
                        grid.project(&z, pj, &mut buf);
                        for &(i, w) in &buf {
                            row[i] += w;
                        }
                    }
                }
            }
        }

        let mut logits = Vec::with_capacity(num_groups);
        let (mut init_sum, mut final_sum) = (0.0, 0.0);
        for (g, row) in q.iter_mut().enumerate() {
            let mut l = vec![S::zero(); natoms];
            if counts[g] > 0 {
                let inv = S::from_usize_lossy(counts[g]).recip();
                row.iter_mut().for_each(|v| *v *= inv);
                let r = maximize(&mut l, &cfg.optimizer, |p, grad| crate::models::cross_entropy(row, p, grad))
                    .map_err(|e| e.at_step(h))?;
                init_sum += r.initial.as_f64() * counts[g] as f64;
                final_sum += r.final_value.as_f64() * counts[g] as f64;
            }
            logits.push(l);
        }
        let model = CategoricalModel::from_logits(feature, na, grid.clone(), logits)?;
        let n = subset.len().max(1) as f64;
        records.push(FitRecord {
            index: h,
            num_targets: subset.len(),
            subset_hash: hash,
            depends_on: chain.clone(),
            initial_objective: init_sum / n,
            final_objective: final_sum / n,
        });
        models[h - 1] = Some(FittedModel::Categorical(model));
    }
    records.reverse();
    Ok(ReturnEstimator { models: models.into_iter().map(Option::unwrap).collect(), records })
}

/// Sparse `sum_a' pi(a'|x') p(. | x', a')`.
fn next_cell_law<S: Scalar>(m: &CategoricalModel<S>, policy: &Policy<S>, x_next: &[S], natoms: usize) -> Vec<(usize, S)> {
    let mut mix = vec![S::zero(); natoms];
    for (a, &pa) in policy.probs(x_next).iter().enumerate() {
        if pa == S::zero() {
            continue;
        }
        for (v, &p) in mix.iter_mut().zip(m.probs(x_next, ActionId(a))) {
            *v += pa * p;
        }
    }
    let eps = S::lit(1e-12);
    mix.into_iter().enumerate().filter(|&(_, p)| p > eps).collect()
}
