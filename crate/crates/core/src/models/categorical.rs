//! Fixed-grid categorical distributions.

use serde::{Deserialize, Serialize};

use super::{check_groups, floor_log, group_of, maximize, ConditionalDensity, FeatureMap, OptimizerConfig, RegressionTargets};
use crate::mdp::ActionId;
use crate::scalar::softmax_into;
use crate::{Error, Result, RngStream, Scalar};

/// Regular tensor-product grid of atoms. Atom index is row-major over dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomGrid<S> {
    counts: Vec<usize>,
    lo: Vec<S>,
    hi: Vec<S>,
}

impl<S: Scalar> AtomGrid<S> {
    pub fn new(counts: Vec<usize>, lo: Vec<S>, hi: Vec<S>) -> Result<Self> {
        if counts.is_empty() || counts.len() != lo.len() || counts.len() != hi.len() {
            return Err(Error::InvalidArgument("grid counts and ranges must agree in length".into()));
        }
        for j in 0..counts.len() {
            if counts[j] == 0 || !(hi[j] >= lo[j]) || !lo[j].is_finite() || !hi[j].is_finite() {
                return Err(Error::InvalidArgument(format!("bad grid axis {j}")));
            }
        }
        Ok(Self { counts, lo, hi })
    }

    pub fn uniform_1d(n: usize, lo: S, hi: S) -> Result<Self> {
        Self::new(vec![n], vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn num_atoms(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn spacing(&self, j: usize) -> S {
        if self.counts[j] < 2 {
            S::zero()
        } else {
            (self.hi[j] - self.lo[j]) / S::from_usize_lossy(self.counts[j] - 1)
        }
    }

    fn axis_value(&self, j: usize, i: usize) -> S {
        self.lo[j] + self.spacing(j) * S::from_usize_lossy(i)
    }

    pub fn atom_into(&self, index: usize, out: &mut [S]) {
        let mut rem = index;
        for j in (0..self.dim()).rev() {
            out[j] = self.axis_value(j, rem % self.counts[j]);
            rem /= self.counts[j];
        }
    }

    pub fn atom(&self, index: usize) -> Vec<S> {
        let mut out = vec![S::zero(); self.dim()];
        self.atom_into(index, &mut out);
        out
    }

    /// Multilinear projection of a point mass at `z` (clipped into the grid
    /// range) onto the surrounding `2^d` atoms. Appends `(atom, weight)` pairs
    /// with positive weight to `out`; weights sum to `mass`.
    pub fn project(&self, z: &[S], mass: S, out: &mut Vec<(usize, S)>) {
        let d = self.dim();
        let mut base = [0usize; 8];
        let mut frac = [S::zero(); 8];
        assert!(d <= 8, "projection supports up to 8 dimensions");
        for j in 0..d {
            let n = self.counts[j];
            if n == 1 {
                base[j] = 0;
                frac[j] = S::zero();
                continue;
            }
            let zc = z[j].max(self.lo[j]).min(self.hi[j]);
            let pos = (zc - self.lo[j]) / self.spacing(j);
            let i = pos.floor().to_usize().unwrap_or(0).min(n - 2);
            base[j] = i;
            frac[j] = (pos - S::from_usize_lossy(i)).max(S::zero()).min(S::one());
        }
        for corner in 0..(1usize << d) {
            let mut w = mass;
            let mut index = 0usize;
            for j in 0..d {
                let up = (corner >> j) & 1 == 1;
                if up && self.counts[j] == 1 {
                    w = S::zero();
                    break;
                }
                w *= if up { frac[j] } else { S::one() - frac[j] };
                index = index * self.counts[j] + base[j] + usize::from(up);
            }
            if w > S::zero() {
                out.push((index, w));
            }
        }
    }

    /// Dense projection of many unit-mass points, averaged.
    pub fn project_mean(&self, zs: &[S]) -> Vec<S> {
        let d = self.dim();
        let n = zs.len() / d;
        let mut q = vec![S::zero(); self.num_atoms()];
        if n == 0 {
            return q;
        }
        let mass = S::from_usize_lossy(n).recip();
        let mut buf = Vec::with_capacity(1 << d);
        for z in zs.chunks_exact(d) {
            buf.clear();
            self.project(z, mass, &mut buf);
            for &(i, w) in &buf {
                q[i] += w;
            }
        }
        q
    }
}

/// Categorical distribution on an [`AtomGrid`] per `(cell, action)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalModel<S> {
    feature: FeatureMap,
    num_actions: usize,
    grid: AtomGrid<S>,
    logits: Vec<Vec<S>>,
    #[serde(skip, default = "Vec::new")]
    probs: Vec<Vec<S>>,
    #[serde(skip, default = "Vec::new")]
    cdf: Vec<Vec<S>>,
}

impl<S: Scalar> CategoricalModel<S> {
    pub fn from_logits(feature: FeatureMap, num_actions: usize, grid: AtomGrid<S>, logits: Vec<Vec<S>>) -> Result<Self> {
        let mut m = Self { feature, num_actions, grid, logits, probs: Vec::new(), cdf: Vec::new() };
        m.rebuild_cache()?;
        Ok(m)
    }

    pub fn from_probs(feature: FeatureMap, num_actions: usize, grid: AtomGrid<S>, probs: Vec<Vec<S>>) -> Result<Self> {
        let tiny = S::lit(1e-300).max(S::min_positive_value());
        let logits = probs.iter().map(|row| row.iter().map(|&p| p.max(tiny).ln()).collect()).collect();
        Self::from_logits(feature, num_actions, grid, logits)
    }

    pub(crate) fn rebuild_cache(&mut self) -> Result<()> {
        check_groups(&self.feature, self.num_actions, &self.logits)?;
        let n = self.grid.num_atoms();
        self.probs.clear();
        self.cdf.clear();
        for row in &self.logits {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            let mut p = vec![S::zero(); n];
            softmax_into(row, &mut p);
            let mut acc = S::zero();
            let c = p
                .iter()
                .map(|&v| {
                    acc += v;
                    acc
                })
                .collect();
            self.probs.push(p);
            self.cdf.push(c);
        }
        Ok(())
    }

    pub fn grid(&self) -> &AtomGrid<S> {
        &self.grid
    }

    pub fn feature(&self) -> &FeatureMap {
        &self.feature
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn group_probs(&self, group: usize) -> &[S] {
        &self.probs[group]
    }

    pub fn probs(&self, x: &[S], a: ActionId) -> &[S] {
        &self.probs[group_of(&self.feature, self.num_actions, x, a)]
    }
}

impl<S: Scalar> ConditionalDensity<S> for CategoricalModel<S> {
    fn reward_dim(&self) -> usize {
        self.grid.dim()
    }

    fn sample_into(&self, x: &[S], a: ActionId, rng: &mut RngStream, out: &mut [S]) {
        let cdf = &self.cdf[group_of(&self.feature, self.num_actions, x, a)];
        let u = S::unit(rng) * cdf[cdf.len() - 1];
        let i = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        self.grid.atom_into(i, out);
    }

    /// Log of the interpolated atom mass at `z`; the floor outside the grid range.
    fn log_density(&self, x: &[S], a: ActionId, z: &[S]) -> S {
        let g = &self.grid;
        if (0..g.dim()).any(|j| z[j] < g.lo[j] || z[j] > g.hi[j]) {
            return floor_log(S::neg_infinity());
        }
        let p = self.probs(x, a);
        let mut buf = Vec::new();
        g.project(z, S::one(), &mut buf);
        floor_log(buf.iter().fold(S::zero(), |acc, &(i, w)| acc + w * p[i]).ln())
    }
}

/// Cross-entropy objective `sum_j q_j log softmax(l)_j` and its gradient `q - p * sum(q)`.
pub fn cross_entropy<S: Scalar>(q: &[S], logits: &[S], grad: &mut [S]) -> S {
    let mut p = vec![S::zero(); logits.len()];
    let lse = softmax_into(logits, &mut p);
    let mass = q.iter().fold(S::zero(), |a, &b| a + b);
    let mut v = S::zero();
    for j in 0..q.len() {
        if q[j] > S::zero() {
            v += q[j] * (logits[j] - lse);
        }
        grad[j] = q[j] - p[j] * mass;
    }
    v
}

pub(super) fn fit_group<S: Scalar>(
    grid: &AtomGrid<S>,
    targets: &RegressionTargets<S>,
    idx: &[usize],
    cfg: &OptimizerConfig,
) -> Result<(Vec<S>, (f64, f64))> {
    let mut logits = vec![S::zero(); grid.num_atoms()];
    if idx.is_empty() {
        return Ok((logits, (0.0, 0.0)));
    }
    let q = grid.project_mean(&targets.gather_z(idx));
    let r = maximize(&mut logits, cfg, |l, g| cross_entropy(&q, l, g))?;
    let n = idx.len() as f64;
    Ok((logits, (r.initial.as_f64() * n, r.final_value.as_f64() * n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn projection_examples() {
        let g = AtomGrid::uniform_1d(3, 0.0f64, 2.0).unwrap();
        let mut out = Vec::new();
        g.project(&[0.5], 1.0, &mut out);
        assert_eq!(out, vec![(0, 0.5), (1, 0.5)]);
        out.clear();
        g.project(&[1.0], 1.0, &mut out);
        assert_eq!(out, vec![(1, 1.0)]);
        out.clear();
        g.project(&[7.0], 1.0, &mut out);
        assert_eq!(out, vec![(2, 1.0)]);
        out.clear();
        g.project(&[-3.0], 0.25, &mut out);
        assert_eq!(out, vec![(0, 0.25)]);
    }

    #[test]
    fn two_d_projection_is_bilinear() {
        let g = AtomGrid::new(vec![2, 2], vec![0.0f64, 0.0], vec![1.0, 1.0]).unwrap();
        let mut out = Vec::new();
        g.project(&[0.25, 0.5], 1.0, &mut out);
        let mut dense = [0.0; 4];
        for (i, w) in out {
            dense[i] = w;
        }
        // index = i0 * 2 + i1
        assert_eq!(dense, [0.375, 0.375, 0.125, 0.125]);
        assert_eq!(g.atom(2), vec![1.0, 0.0]);
    }

    proptest! {
        #[test]
        fn projection_preserves_mass_and_mean(z in -3.0f64..3.0, w in -3.0f64..3.0) {
            let g = AtomGrid::new(vec![7, 5], vec![-2.0, -1.0], vec![2.0, 1.5]).unwrap();
            let mut out = Vec::new();
            g.project(&[z, w], 1.0, &mut out);
            let mass: f64 = out.iter().map(|p| p.1).sum();
            prop_assert!((mass - 1.0).abs() < 1e-12);
            prop_assert!(out.iter().all(|p| p.1 >= 0.0));
            // inside the range the projection keeps the mean
            let mut m = [0.0; 2];
            for &(i, p) in &out {
                let a = g.atom(i);
                m[0] += p * a[0];
                m[1] += p * a[1];
            }
            let zc = [z.clamp(-2.0, 2.0), w.clamp(-1.0, 1.5)];
            prop_assert!((m[0] - zc[0]).abs() < 1e-9 && (m[1] - zc[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn fit_recovers_projected_mass() {
        let mut t = RegressionTargets::<f64>::new(1, 1);
        for z in [0.0, 0.5, 1.0, 1.0] {
            t.push(&[0.0], ActionId(0), &[z]).unwrap();
        }
        let spec = crate::models::ModelSpec::Categorical {
            atoms: vec![3],
            range: Some(vec![[0.0, 2.0]]),
            optimizer: OptimizerConfig::adam(0.1, 2000),
        };
        let out = spec.fit(FeatureMap::Constant, 1, &t, &RngStream::new(0)).unwrap();
        let crate::models::FittedModel::Categorical(m) = &out.model else { unreachable!() };
        let p = m.probs(&[0.0], ActionId(0));
        assert!((p[0] - 0.375).abs() < 1e-3 && (p[1] - 0.625).abs() < 1e-3 && p[2] < 1e-3, "{p:?}");
        let back = crate::models::FittedModel::from_json(&out.model.to_json().unwrap()).unwrap();
        assert_eq!(back, out.model);
    }
}
