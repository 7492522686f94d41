use crate::{Error, Result, Scalar};

/// Multiset of `d`-dimensional return samples, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution<S> {
    dim: usize,
    data: Vec<S>,
}

impl<S: Scalar> EmpiricalDistribution<S> {
    pub fn new(samples: Vec<Vec<S>>) -> Result<Self> {
        let dim = samples.first().map(Vec::len).ok_or_else(|| Error::InvalidArgument("no samples".into()))?;
        if dim == 0 {
            return Err(Error::InvalidArgument("zero-dimensional samples".into()));
        }
        let mut data = Vec::with_capacity(dim * samples.len());
        for s in &samples {
            if s.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: s.len() });
            }
            data.extend_from_slice(s);
        }
        Ok(Self { dim, data })
    }

    pub fn from_flat(dim: usize, data: Vec<S>) -> Result<Self> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "flat buffer of length {} is not a non-empty multiple of {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_scalars(values: Vec<S>) -> Result<Self> {
        Self::from_flat(1, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[S] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, S> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[S] {
        &self.data
    }

    /// Values of one coordinate.
    pub fn column(&self, j: usize) -> Vec<S> {
        self.iter().map(|s| s[j]).collect()
    }

    pub fn mean(&self) -> Vec<S> {
        let mut m = vec![S::zero(); self.dim];
        for s in self.iter() {
            for (acc, &v) in m.iter_mut().zip(s) {
                *acc += v;
            }
        }
        let n = S::from_usize_lossy(self.len());
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    pub fn std(&self) -> Vec<S> {
        let mean = self.mean();
        let mut var = vec![S::zero(); self.dim];
        for s in self.iter() {
            for ((acc, &v), &m) in var.iter_mut().zip(s).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let n = S::from_usize_lossy(self.len());
        var.into_iter().map(|v| (v / n).sqrt()).collect()
    }
}
