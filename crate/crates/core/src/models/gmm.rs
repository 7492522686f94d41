//! Diagonal Gaussian mixtures, one per `(cell, action)` group.
//!
//! Parameterization: mixing weights through softmax logits, per-coordinate
//! scale `sigma = floor + exp(s)` so the likelihood stays bounded.

use serde::{Deserialize, Serialize};

use super::{check_groups, floor_log, group_of, maximize, Bounds, ConditionalDensity, FeatureMap, OptimizerConfig};
use crate::mdp::ActionId;
use crate::scalar::softmax_into;
use crate::{Error, Result, RngStream, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmGroup<S> {
    pub logits: Vec<S>,
    /// `K x d`, row-major.
    pub means: Vec<S>,
    /// `K x d` unconstrained scale parameters.
    pub log_scales: Vec<S>,
}

impl<S: Scalar> GmmGroup<S> {
    fn pack(&self) -> Vec<S> {
        let mut p = self.logits.clone();
        p.extend_from_slice(&self.means);
        p.extend_from_slice(&self.log_scales);
        p
    }

    fn unpack(p: &[S], k: usize, d: usize) -> Self {
        Self {
            logits: p[..k].to_vec(),
            means: p[k..k + k * d].to_vec(),
            log_scales: p[k + k * d..].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel<S> {
    feature: FeatureMap,
    num_actions: usize,
    dim: usize,
    components: usize,
    std_floor: S,
    /// Samples are clipped into this box.
    sample_box: Bounds<S>,
    groups: Vec<GmmGroup<S>>,
}

impl<S: Scalar> GmmModel<S> {
    pub fn new(
        feature: FeatureMap,
        num_actions: usize,
        dim: usize,
        components: usize,
        std_floor: S,
        sample_box: Bounds<S>,
        groups: Vec<GmmGroup<S>>,
    ) -> Result<Self> {
        check_groups(&feature, num_actions, &groups)?;
        for g in &groups {
            if g.logits.len() != components || g.means.len() != components * dim || g.log_scales.len() != components * dim {
                return Err(Error::Validation("gmm group has inconsistent parameter shapes".into()));
            }
        }
        Ok(Self { feature, num_actions, dim, components, std_floor, sample_box, groups })
    }

    pub fn groups(&self) -> &[GmmGroup<S>] {
        &self.groups
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn std_floor(&self) -> S {
        self.std_floor
    }

    /// Mixing weights, means and standard deviations of the group for `(x, a)`.
    pub fn mixture(&self, x: &[S], a: ActionId) -> (Vec<S>, &[S], Vec<S>) {
        let g = &self.groups[group_of(&self.feature, self.num_actions, x, a)];
        let mut w = vec![S::zero(); self.components];
        softmax_into(&g.logits, &mut w);
        let sigma = g.log_scales.iter().map(|&s| self.std_floor + s.exp()).collect();
        (w, &g.means, sigma)
    }
}

impl<S: Scalar> ConditionalDensity<S> for GmmModel<S> {
    fn reward_dim(&self) -> usize {
        self.dim
    }

    fn sample_into(&self, x: &[S], a: ActionId, rng: &mut RngStream, out: &mut [S]) {
        let g = &self.groups[group_of(&self.feature, self.num_actions, x, a)];
        let mut w = vec![S::zero(); self.components];
        softmax_into(&g.logits, &mut w);
        let c = rng.categorical(&w);
        let d = self.dim;
        for j in 0..d {
            let sigma = self.std_floor + g.log_scales[c * d + j].exp();
            out[j] = g.means[c * d + j] + sigma * S::standard_normal(rng);
        }
        self.sample_box.clip(out);
    }

    fn log_density(&self, x: &[S], a: ActionId, z: &[S]) -> S {
        let g = &self.groups[group_of(&self.feature, self.num_actions, x, a)];
        let mut scratch = vec![S::zero(); g.pack().len()];
        let ll = gmm_objective(&g.pack(), z, self.dim, self.components, self.std_floor, &mut scratch);
        floor_log(ll)
    }
}

/// Average log-likelihood of the flat `n x d` data under packed parameters
/// `[logits | means | scales]`; writes the gradient into `grad`.
pub fn gmm_objective<S: Scalar>(p: &[S], data: &[S], d: usize, k: usize, floor: S, grad: &mut [S]) -> S {
    let n = data.len() / d;
    let (logits, rest) = p.split_at(k);
    let (means, scales) = rest.split_at(k * d);
    let mut w = vec![S::zero(); k];
    let lse_w = softmax_into(logits, &mut w);
    let sigma: Vec<S> = scales.iter().map(|&s| floor + s.exp()).collect();
    let inv_var: Vec<S> = sigma.iter().map(|&s| (s * s).recip()).collect();
    let half = S::lit(0.5);
    let half_ln_2pi = S::lit(0.5 * (2.0 * std::f64::consts::PI).ln());
    let cst: Vec<S> = (0..k)
        .map(|c| {
            let log_det = sigma[c * d..(c + 1) * d].iter().fold(S::zero(), |acc, &s| acc + s.ln());
            logits[c] - lse_w - log_det - S::from_usize_lossy(d) * half_ln_2pi
        })
        .collect();

    grad.iter_mut().for_each(|g| *g = S::zero());
    let (g_logit, g_rest) = grad.split_at_mut(k);
    let (g_mean, g_scale) = g_rest.split_at_mut(k * d);
    let mut l = vec![S::zero(); k];
    let mut total = S::zero();
    let tiny = S::lit(1e-18);
    for z in data.chunks_exact(d) {
        let mut max = S::neg_infinity();
        for c in 0..k {
            let mu = &means[c * d..(c + 1) * d];
            let iv = &inv_var[c * d..(c + 1) * d];
            let mut acc = cst[c];
            for j in 0..d {
                let diff = z[j] - mu[j];
                acc -= half * diff * diff * iv[j];
            }
            l[c] = acc;
            max = max.max(acc);
        }
        let mut sum = S::zero();
        for v in l.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        total += max + sum.ln();
        for c in 0..k {
            let r = l[c] / sum;
            if r < tiny {
                continue;
            }
            g_logit[c] += r;
            for j in 0..d {
                let cj = c * d + j;
                let diff = z[j] - means[cj];
                let t = diff * inv_var[cj];
                g_mean[cj] += r * t;
                g_scale[cj] += r * (diff * t - S::one());
            }
        }
    }
    let nn = S::from_usize_lossy(n.max(1));
    for c in 0..k {
        g_logit[c] = (g_logit[c] - S::from_usize_lossy(n) * w[c]) / nn;
    }
    for cj in 0..k * d {
        g_mean[cj] /= nn;
        // d/ds of log N through sigma = floor + exp(s)
        g_scale[cj] = g_scale[cj] / nn / sigma[cj] * (sigma[cj] - floor);
    }
    total / nn
}

fn init_group<S: Scalar>(data: &[S], d: usize, k: usize, floor: S, bounds: &Bounds<S>, rng: &mut RngStream) -> GmmGroup<S> {
    let n = data.len() / d;
    let to_scale = |sd: S| (sd - floor).max(floor).ln();
    if n == 0 {
        // spread evenly along the diagonal of the global box
        let mut means = Vec::with_capacity(k * d);
        for c in 0..k {
            let t = S::lit((c as f64 + 0.5) / k as f64);
            for j in 0..d {
                means.push(bounds.lo[j] + t * (bounds.hi[j] - bounds.lo[j]));
            }
        }
        let log_scales = (0..k)
            .flat_map(|_| (0..d).map(|j| to_scale((bounds.hi[j] - bounds.lo[j]) * S::lit(0.5))))
            .collect();
        return GmmGroup { logits: vec![S::zero(); k], means, log_scales };
    }

    // k-means++ seeding
    let point = |i: usize| &data[i * d..(i + 1) * d];
    let dist2 = |a: &[S], b: &[S]| a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y));
    let mut means: Vec<S> = point(rng.index(n)).to_vec();
    let mut best: Vec<S> = (0..n).map(|i| dist2(point(i), &means[..d])).collect();
    for _ in 1..k {
        let total = best.iter().fold(S::zero(), |a, &b| a + b);
        let pick = if total > S::zero() { rng.categorical(&best) } else { rng.index(n) };
        let c = point(pick).to_vec();
        for i in 0..n {
            best[i] = best[i].min(dist2(point(i), &c));
        }
        means.extend(c);
    }

    let nn = S::from_usize_lossy(n);
    let mut mean = vec![S::zero(); d];
    for z in data.chunks_exact(d) {
        for j in 0..d {
            mean[j] += z[j] / nn;
        }
    }
    let mut var = vec![S::zero(); d];
    for z in data.chunks_exact(d) {
        for j in 0..d {
            var[j] += (z[j] - mean[j]) * (z[j] - mean[j]) / nn;
        }
    }
    let log_scales = (0..k).flat_map(|_| var.iter().map(|&v| to_scale(v.sqrt()))).collect::<Vec<_>>();
    GmmGroup { logits: vec![S::zero(); k], means, log_scales }
}

/// Returns the fitted group and `(initial, final)` summed log-likelihood.
pub(super) fn fit_group<S: Scalar>(
    data: &[S],
    d: usize,
    k: usize,
    floor: S,
    bounds: &Bounds<S>,
    cfg: &OptimizerConfig,
    rng: &mut RngStream,
) -> Result<(GmmGroup<S>, (f64, f64))> {
    let init = init_group(data, d, k, floor, bounds, rng);
    let n = data.len() / d;
    if n == 0 {
        return Ok((init, (0.0, 0.0)));
    }
    let mut p = init.pack();
    let report = maximize(&mut p, cfg, |params, grad| gmm_objective(params, data, d, k, floor, grad))?;
    let nn = n as f64;
    Ok((GmmGroup::unpack(&p, k, d), (report.initial.as_f64() * nn, report.final_value.as_f64() * nn)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelSpec, RegressionTargets};

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngStream::new(3);
        let (k, d) = (3, 2);
        let data: Vec<f64> = (0..40).map(|_| f64::standard_normal(&mut rng) * 1.5).collect();
        let p: Vec<f64> = (0..k + 2 * k * d).map(|_| 0.3 * f64::standard_normal(&mut rng)).collect();
        let floor = 1e-3;
        let mut g = vec![0.0; p.len()];
        gmm_objective(&p, &data, d, k, floor, &mut g);
        let mut scratch = g.clone();
        for i in 0..p.len() {
            let h = 1e-6;
            let mut up = p.clone();
            up[i] += h;
            let mut dn = p.clone();
            dn[i] -= h;
            let fd = (gmm_objective(&up, &data, d, k, floor, &mut scratch) - gmm_objective(&dn, &data, d, k, floor, &mut scratch))
                / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6, "param {i}: fd {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn fits_two_separated_modes() {
        let mut rng = RngStream::new(11);
        let mut t = RegressionTargets::new(1, 1);
        for i in 0..2000 {
            let m = if i % 2 == 0 { -1.0 } else { 1.0 };
            t.push(&[0.0], ActionId(0), &[m + 0.1 * f64::standard_normal(&mut rng)]).unwrap();
        }
        let spec = ModelSpec::Gmm { components: 2, optimizer: OptimizerConfig::adam(0.05, 1500) };
        let out = spec.fit(FeatureMap::Constant, 1, &t, &RngStream::new(0)).unwrap();
        assert!(out.final_objective >= out.initial_objective);
        let crate::models::FittedModel::Gmm(m) = &out.model else { unreachable!() };
        let (w, means, sigma) = m.mixture(&[0.0], ActionId(0));
        let mut mu = means.to_vec();
        mu.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((mu[0] + 1.0).abs() < 0.03 && (mu[1] - 1.0).abs() < 0.03, "{mu:?}");
        assert!(w.iter().all(|&w| (w - 0.5).abs() < 0.05));
        assert!(sigma.iter().all(|&s| (s - 0.1).abs() < 0.02));
        // true density near the mode: log(0.5 * N(0; 0, 0.1)) ~ 0.69
        let ld = m.log_density(&[0.0], ActionId(0), &[1.0]);
        assert!((ld - 0.69).abs() < 0.15, "{ld}");
        assert_eq!(m.log_density(&[0.0], ActionId(0), &[1e6]), -30.0);
    }

    #[test]
    fn f32_fit_runs() {
        let mut t = RegressionTargets::<f32>::new(1, 2);
        let mut rng = RngStream::new(1);
        for _ in 0..200 {
            t.push(&[0.0], ActionId(0), &[f32::standard_normal(&mut rng), 2.0 + f32::standard_normal(&mut rng)])
                .unwrap();
        }
        let spec = ModelSpec::Gmm { components: 2, optimizer: OptimizerConfig::adam(0.05, 200) };
        let out = spec.fit(FeatureMap::Constant, 1, &t, &RngStream::new(0)).unwrap();
        assert!(out.final_objective >= out.initial_objective);
        let z = out.model.sample(&[0.0], ActionId(0), &mut rng);
        assert_eq!(z.len(), 2);
    }
}
