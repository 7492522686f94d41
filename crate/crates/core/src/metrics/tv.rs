use serde::{Deserialize, Serialize};

use crate::mdp::EmpiricalDistribution;
use crate::{Error, Result, Scalar};

/// Regular histogram: bin count and `[lo, hi]` per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub bins: Vec<usize>,
    pub ranges: Vec<[f64; 2]>,
}

impl HistogramSpec {
    pub fn new(bins: Vec<usize>, ranges: Vec<[f64; 2]>) -> Result<Self> {
        let s = Self { bins, ranges };
        s.validate()?;
        Ok(s)
    }

    pub fn uniform(dim: usize, bins: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![bins; dim], vec![[lo, hi]; dim])
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins.is_empty() || self.bins.len() != self.ranges.len() {
            return Err(Error::InvalidArgument("histogram needs one bin count and range per dimension".into()));
        }
        if self.bins.contains(&0) || self.ranges.iter().any(|r| !(r[1] > r[0])) {
            return Err(Error::InvalidArgument("histogram bins must be positive and ranges non-degenerate".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.bins.len()
    }

    pub fn num_bins(&self) -> usize {
        self.bins.iter().product()
    }

    /// Flat bin index of `z`, clipping into range. Second value reports whether clipping happened.
    pub fn bin_of(&self, z: &[f64]) -> (usize, bool) {
        let mut idx = 0;
        let mut clipped = false;
        for j in 0..self.dim() {
            let [lo, hi] = self.ranges[j];
            let n = self.bins[j];
            let mut k = ((z[j] - lo) / (hi - lo) * n as f64).floor();
            if !(k >= 0.0) {
                clipped |= z[j] < lo || z[j].is_nan();
                k = 0.0;
            }
            if k >= n as f64 {
                clipped |= z[j] > hi;
                k = (n - 1) as f64;
            }
            idx = idx * n + k as usize;
        }
        (idx, clipped)
    }

    fn histogram<S: Scalar>(&self, p: &EmpiricalDistribution<S>) -> (Vec<f64>, usize) {
        let mut h = vec![0.0; self.num_bins()];
        let mut clipped = 0;
        let w = 1.0 / p.len() as f64;
        let mut z = vec![0.0; self.dim()];
        for s in p.iter() {
            for (a, &b) in z.iter_mut().zip(s) {
                *a = b.as_f64();
            }
            let (i, c) = self.bin_of(&z);
            h[i] += w;
            clipped += usize::from(c);
        }
        (h, clipped)
    }
}

fn check_inputs<S: Scalar>(spec: &HistogramSpec, p: &EmpiricalDistribution<S>) -> Result<()> {
    spec.validate()?;
    if p.is_empty() {
        return Err(Error::InvalidArgument("empty sample set".into()));
    }
    if p.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: p.dim() });
    }
    Ok(())
}

/// Half the L1 distance between the normalized histograms of two sample sets.
/// Out-of-range samples are clipped into the boundary bins (with a warning).
pub fn empirical_tv<S: Scalar>(p: &EmpiricalDistribution<S>, q: &EmpiricalDistribution<S>, spec: &HistogramSpec) -> Result<f64> {
    check_inputs(spec, p)?;
    check_inputs(spec, q)?;
    let (hp, cp) = spec.histogram(p);
    let (hq, cq) = spec.histogram(q);
    if cp + cq > 0 {
        log::warn!("histogram range clipped {} of {} samples", cp + cq, p.len() + q.len());
    }
    Ok(0.5 * hp.iter().zip(&hq).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// TV between a sample histogram and known bin probabilities.
pub fn tv_against_masses<S: Scalar>(p: &EmpiricalDistribution<S>, masses: &[f64], spec: &HistogramSpec) -> Result<f64> {
    check_inputs(spec, p)?;
    if masses.len() != spec.num_bins() {
        return Err(Error::DimensionMismatch { expected: spec.num_bins(), got: masses.len() });
    }
    let (hp, _) = spec.histogram(p);
    Ok(0.5 * hp.iter().zip(masses).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Bin probabilities of a 1-d density by composite Simpson quadrature; mass
/// outside the range is added to the boundary bins when `tails` gives it.
pub fn bin_masses(pdf: impl Fn(f64) -> f64, spec: &HistogramSpec, tails: Option<(f64, f64)>) -> Result<Vec<f64>> {
    spec.validate()?;
    if spec.dim() != 1 {
        return Err(Error::UnsupportedDimension { dim: spec.dim(), reason: "density quadrature is 1-d" });
    }
    let [lo, hi] = spec.ranges[0];
    let n = spec.bins[0];
    let w = (hi - lo) / n as f64;
    let mut out: Vec<f64> = (0..n).map(|b| simpson(&pdf, lo + b as f64 * w, lo + (b + 1) as f64 * w, 64)).collect();
    if let Some((below, above)) = tails {
        out[0] += below;
        out[n - 1] += above;
    }
    Ok(out)
}

pub(crate) fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let m = intervals + intervals % 2;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `0.5 * int |f - g|` over `[lo, hi]` by quadrature on `points` subintervals.
/// Points where a density jumps should be passed as `breaks` so no panel straddles them.
pub fn tv_density_1d(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, lo: f64, hi: f64, breaks: &[f64], points: usize) -> f64 {
    let mut knots: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
    knots.push(lo);
    knots.push(hi);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let total = hi - lo;
    let diff = |z: f64| (f(z) - g(z)).abs();
    let mut acc = 0.0;
    for w in knots.windows(2) {
        let share = (((w[1] - w[0]) / total) * points as f64).ceil().max(2.0) as usize;
        acc += simpson(&diff, w[0], w[1], share);
    }
    0.5 * acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RngStream;
    use proptest::prelude::*;

    fn draws(mean: f64, sd: f64, n: usize, seed: u64) -> EmpiricalDistribution<f64> {
        let mut rng = RngStream::new(seed);
        EmpiricalDistribution::from_scalars((0..n).map(|_| mean + sd * f64::standard_normal(&mut rng)).collect()).unwrap()
    }

    #[test]
    fn separated_gaussians_are_nearly_disjoint() {
        let spec = HistogramSpec::uniform(1, 100, -1.5, 1.5).unwrap();
        let tv = empirical_tv(&draws(0.0, 0.1, 20_000, 1), &draws(1.0, 0.1, 20_000, 2), &spec).unwrap();
        assert!(tv >= 0.99);
    }

    #[test]
    fn identical_and_disjoint() {
        let spec = HistogramSpec::uniform(1, 10, 0.0, 1.0).unwrap();
        let a = EmpiricalDistribution::from_scalars(vec![0.05, 0.15, 0.95]).unwrap();
        assert_eq!(empirical_tv(&a, &a, &spec).unwrap(), 0.0);
        let b = EmpiricalDistribution::from_scalars(vec![0.55, 0.65]).unwrap();
        assert!((empirical_tv(&a, &b, &spec).unwrap() - 1.0).abs() < 1e-12);
        let empty = EmpiricalDistribution::<f64>::from_scalars(vec![]);
        assert!(empty.is_err() || empirical_tv(&a, &empty.unwrap(), &spec).is_err());
    }

    #[test]
    fn density_tv_of_shifted_uniforms() {
        let f = |z: f64| if (0.0..=1.0).contains(&z) { 1.0 } else { 0.0 };
        let g = |z: f64| if (0.5..=1.5).contains(&z) { 1.0 } else { 0.0 };
        let tv = tv_density_1d(f, g, -1.0, 2.0, &[0.0, 0.5, 1.0, 1.5], 3000);
        assert!((tv - 0.5).abs() < 1e-9, "{tv}");
    }

    proptest! {
        #[test]
        fn tv_is_symmetric_and_bounded(a in proptest::collection::vec(-2.0f64..2.0, 1..60),
                                       b in proptest::collection::vec(-2.0f64..2.0, 1..60)) {
            let spec = HistogramSpec::uniform(1, 17, -1.5, 1.5).unwrap();
            let p = EmpiricalDistribution::from_scalars(a).unwrap();
            let q = EmpiricalDistribution::from_scalars(b).unwrap();
            let x = empirical_tv(&p, &q, &spec).unwrap();
            let y = empirical_tv(&q, &p, &spec).unwrap();
            prop_assert!((x - y).abs() < 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&x));
        }
    }
}
