use crate::{Error, Result, RngStream, Scalar};

/// Finite discrete law: weighted atoms in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl DiscreteLaw {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::InvalidArgument("discrete law needs one weight per atom".into()));
        }
        let d = atoms[0].len();
        if atoms.iter().any(|a| a.len() != d) {
            return Err(Error::InvalidArgument("atoms differ in dimension".into()));
        }
        let s: f64 = weights.iter().sum();
        if weights.iter().any(|&w| !(w >= 0.0)) || (s - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("weights must form a probability vector (sum {s})")));
        }
        Ok(Self { atoms, weights })
    }

    pub fn point(z: Vec<f64>) -> Self {
        Self { atoms: vec![z], weights: vec![1.0] }
    }

    /// Random weights (flat Dirichlet) on the given support.
    pub fn random_on(support: &[Vec<f64>], rng: &mut RngStream) -> Self {
        let mut w: Vec<f64> = support.iter().map(|_| -f64::unit(rng).max(f64::MIN_POSITIVE).ln()).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        Self { atoms: support.to_vec(), weights: w }
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (a, &w) in self.atoms.iter().zip(&self.weights) {
            for (mi, &ai) in m.iter_mut().zip(a) {
                *mi += w * ai;
            }
        }
        m
    }

    /// Exact total variation, merging coincident atoms.
    pub fn tv(&self, other: &Self) -> f64 {
        let mut mass: Vec<(Vec<f64>, f64)> = Vec::new();
        for (sign, law) in [(1.0, self), (-1.0, other)] {
            for (a, &w) in law.atoms.iter().zip(&law.weights) {
                match mass.iter_mut().find(|(b, _)| b == a) {
                    Some(entry) => entry.1 += sign * w,
                    None => mass.push((a.clone(), sign * w)),
                }
            }
        }
        0.5 * mass.iter().map(|(_, m)| m.abs()).sum::<f64>()
    }
}
