use serde::{Deserialize, Serialize};

use super::step_subsets;
use crate::fle::{FitRecord, ReturnEstimator, SplitMode};
use crate::mdp::{OfflineDataset, Policy};
use crate::models::{maximize, ConditionalDensity, FittedModel, OptimizerConfig, QuantileModel};
use crate::{Error, Result, RngStream, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantileTdConfig {
    pub horizon: usize,
    #[serde(default = "default_quantiles")]
    pub num_quantiles: usize,
    /// Huber threshold of the quantile loss.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub split: SplitMode,
}

fn default_quantiles() -> usize {
    100
}

fn default_kappa() -> f64 {
    1.0
}

/// `tau_i = (2i - 1) / (2N)`.
pub fn quantile_midpoints(n: usize) -> Vec<f64> {
    (1..=n).map(|i| (2 * i - 1) as f64 / (2 * n) as f64).collect()
}

/// Negative mean quantile-Huber loss of locations `theta` against sorted
/// targets, summed over quantiles. `prefix`/`prefix_sq` are prefix sums of
/// the sorted targets and their squares (length `n + 1`).
pub fn quantile_huber_objective<S: Scalar>(
    theta: &[S],
    taus: &[f64],
    sorted: &[S],
    prefix: &[S],
    prefix_sq: &[S],
    kappa: S,
    grad: &mut [S],
) -> S {
    let n = sorted.len();
    let nn = S::from_usize_lossy(n);
    let half = S::lit(0.5);
    let mut total = S::zero();
    // region sums over sorted[lo..hi]
    let sums = |lo: usize, hi: usize| (S::from_usize_lossy(hi - lo), prefix[hi] - prefix[lo], prefix_sq[hi] - prefix_sq[lo]);
    for (i, &th) in theta.iter().enumerate() {
        let tau = S::lit(taus[i]);
        let a = sorted.partition_point(|&z| z < th - kappa);
        let b = sorted.partition_point(|&z| z < th);
        let c = sorted.partition_point(|&z| z <= th + kappa);
        let (c0, s0, _) = sums(0, a);
        let (c1, s1, q1) = sums(a, b);
        let (c2, s2, q2) = sums(b, c);
        let (c3, s3, _) = sums(c, n);
        // sum (z - th)^2 over a region: q - 2 th s + c th^2
        let sq = |cnt: S, s: S, q: S| q - S::lit(2.0) * th * s + cnt * th * th;
        let loss = (S::one() - tau) * ((c0 * th - s0) - c0 * half * kappa + sq(c1, s1, q1) * half / kappa)
            + tau * (sq(c2, s2, q2) * half / kappa + (s3 - c3 * th) - c3 * half * kappa);
        // d loss / d theta
        let dl = (S::one() - tau) * (c0 + (c1 * th - s1) / kappa) - tau * ((s2 - c2 * th) / kappa + c3);
        total -= loss / nn;
        grad[i] = -dl / nn;
    }
    total
}

/// Backward per-step quantile-regression TD with one sampled next-step atom
/// per tuple. Scalar rewards only.
pub fn quantile_td_run<S: Scalar>(
    dataset: &OfflineDataset<S>,
    cfg: &QuantileTdConfig,
    policy: &Policy<S>,
    rng: &RngStream,
) -> Result<ReturnEstimator<S>> {
    let d = dataset.meta().reward_dim;
    if d != 1 {
        return Err(Error::UnsupportedDimension { dim: d, reason: "quantile TD only handles scalar rewards" });
    }
    if cfg.num_quantiles == 0 || !(cfg.kappa > 0.0) {
        return Err(Error::Config("quantile TD needs at least one quantile and a positive kappa".into()));
    }
    cfg.optimizer.validate()?;
    let subsets = step_subsets(dataset, cfg.horizon, cfg.split, policy, rng)?;
    let feature = *policy.feature();
    let na = policy.num_actions();
    let taus = quantile_midpoints(cfg.num_quantiles);
    let kappa = S::lit(cfg.kappa);

    let mut models: Vec<Option<FittedModel<S>>> = vec![None; cfg.horizon];
    let mut records = Vec::with_capacity(cfg.horizon);
    let mut chain = Vec::new();
    for h in (1..=cfg.horizon).rev() {
        let subset = &subsets[h - 1];
        let hash = subset.subset_hash();
        chain.insert(0, hash.clone());
        let next = models.get(h).and_then(Option::as_ref);
        let targets = crate::fle::build_targets(subset, next, S::one(), policy, &rng.derive_indexed("step", h as u64))
            .map_err(|e| e.at_step(h))?;
        let groups = targets.group_indices(&feature, na)?;
        let mut locations = Vec::with_capacity(groups.len());
        let (mut init_sum, mut final_sum) = (0.0, 0.0);
        for idx in &groups {
            let mut theta = vec![S::zero(); cfg.num_quantiles];
            if !idx.is_empty() {
                let mut sorted = targets.gather_z(idx);
                sorted.sort_by(|a, b| a.partial_cmp(b).expect("targets are finite"));
                let mut prefix = vec![S::zero(); sorted.len() + 1];
                let mut prefix_sq = vec![S::zero(); sorted.len() + 1];
                for (k, &z) in sorted.iter().enumerate() {
                    prefix[k + 1] = prefix[k] + z;
                    prefix_sq[k + 1] = prefix_sq[k] + z * z;
                }
                let r = maximize(&mut theta, &cfg.optimizer, |p, g| {
                    quantile_huber_objective(p, &taus, &sorted, &prefix, &prefix_sq, kappa, g)
                })
                .map_err(|e| e.at_step(h))?;
                init_sum += r.initial.as_f64() * idx.len() as f64;
                final_sum += r.final_value.as_f64() * idx.len() as f64;
            }
            theta.sort_by(|a, b| a.partial_cmp(b).expect("finite quantiles"));
            locations.push(theta);
        }
        let model = QuantileModel::new(feature, na, locations)?;
        debug_assert_eq!(model.reward_dim(), 1);
        let n = subset.len().max(1) as f64;
        records.push(FitRecord {
            index: h,
            num_targets: subset.len(),
            subset_hash: hash,
            depends_on: chain.clone(),
            initial_objective: init_sum / n,
            final_objective: final_sum / n,
        });
        models[h - 1] = Some(FittedModel::Quantile(model));
    }
    records.reverse();
    Ok(ReturnEstimator { models: models.into_iter().map(Option::unwrap).collect(), records })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(theta: &[f64], taus: &[f64], z: &[f64], kappa: f64) -> f64 {
        let mut total = 0.0;
        for (i, &th) in theta.iter().enumerate() {
            for &zz in z {
                let u = zz - th;
                let l = if u.abs() <= kappa { 0.5 * u * u } else { kappa * (u.abs() - 0.5 * kappa) };
                let w = if u < 0.0 { 1.0 - taus[i] } else { taus[i] };
                total -= w * l / kappa / z.len() as f64;
            }
        }
        total
    }

    #[test]
    fn prefix_sum_objective_matches_brute_force() {
        let mut rng = RngStream::new(5);
        let mut z: Vec<f64> = (0..57).map(|_| 2.0 * f64::standard_normal(&mut rng)).collect();
        z.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut p = vec![0.0];
        let mut q = vec![0.0];
        for &v in &z {
            p.push(p.last().unwrap() + v);
            q.push(q.last().unwrap() + v * v);
        }
        let taus = quantile_midpoints(7);
        let theta: Vec<f64> = (0..7).map(|_| f64::standard_normal(&mut rng)).collect();
        for kappa in [0.3, 1.0] {
            let mut g = vec![0.0; 7];
            let v = quantile_huber_objective(&theta, &taus, &z, &p, &q, kappa, &mut g);
            assert!((v - brute(&theta, &taus, &z, kappa)).abs() < 1e-10);
            for i in 0..7 {
                let mut up = theta.clone();
                up[i] += 1e-6;
                let mut dn = theta.clone();
                dn[i] -= 1e-6;
                let fd = (brute(&up, &taus, &z, kappa) - brute(&dn, &taus, &z, kappa)) / 2e-6;
                assert!((fd - g[i]).abs() < 1e-6);
            }
        }
    }
}
