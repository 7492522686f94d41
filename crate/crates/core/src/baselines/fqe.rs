//! Classic fitted Q evaluation with linear least squares on one-hot
//! `(cell, action)` features, solved through the normal equations.

use crate::fle::SplitMode;
use crate::mdp::{OfflineDataset, Policy};
use crate::{Error, Result, RngStream, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct FqeResult {
    /// `q[h - 1][cell * A + a]`, `NaN` where the step had no data for the group.
    pub q: Vec<Vec<f64>>,
}

/// Backward FQE for a scalar finite-horizon problem:
/// `Q_h = argmin_w sum (phi(x, a) . w - r - V_{h+1}(x'))^2`.
pub fn fqe_least_squares<S: Scalar>(
    dataset: &OfflineDataset<S>,
    horizon: usize,
    split: SplitMode,
    policy: &Policy<S>,
    rng: &RngStream,
) -> Result<FqeResult> {
    if dataset.meta().reward_dim != 1 {
        return Err(Error::UnsupportedDimension { dim: dataset.meta().reward_dim, reason: "least-squares FQE only handles scalar rewards" });
    }
    let subsets = super::step_subsets(dataset, horizon, split, policy, rng)?;
    let feature = *policy.feature();
    let na = policy.num_actions();
    let p = feature.num_cells() * na;
    let mut q: Vec<Vec<f64>> = vec![Vec::new(); horizon];
    for h in (1..=horizon).rev() {
        let mut xtx = vec![0.0; p * p];
        let mut xty = vec![0.0; p];
        for t in subsets[h - 1].iter() {
            let mut phi = vec![0.0; p];
            phi[feature.cell(&t.x) * na + t.a.0] = 1.0;
            let mut y = t.r[0].as_f64();
            if h < horizon {
                let next = &q[h];
                let cell = feature.cell(&t.x_next);
                y += policy
                    .probs(&t.x_next)
                    .iter()
                    .enumerate()
                    .map(|(a, &pa)| pa.as_f64() * next[cell * na + a])
                    .sum::<f64>();
            }
            for i in 0..p {
                if phi[i] == 0.0 {
                    continue;
                }
                xty[i] += phi[i] * y;
                for j in 0..p {
                    xtx[i * p + j] += phi[i] * phi[j];
                }
            }
        }
        q[h - 1] = solve_normal_equations(xtx, xty, p);
    }
    Ok(FqeResult { q })
}

/// Gaussian elimination with partial pivoting; unidentified coordinates are `NaN`.
fn solve_normal_equations(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Vec<f64> {
    let mut free = vec![false; n];
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs())).unwrap();
        if a[piv * n + col].abs() < 1e-12 {
            free[col] = true;
            continue;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = a[i * n + col] / a[col * n + col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[i * n + k] -= f * a[col * n + k];
            }
            b[i] -= f * b[col];
        }
    }
    (0..n).map(|i| if free[i] { f64::NAN } else { b[i] / a[i * n + i] }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_equations_solve_dense_system() {
        let a = vec![4.0, 1.0, 2.0, 1.0, 3.0, 0.0, 2.0, 0.0, 5.0];
        let x = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a[i * 3 + j] * x[j]).sum()).collect();
        let s = solve_normal_equations(a, b, 3);
        for i in 0..3 {
            assert!((s[i] - x[i]).abs() < 1e-12);
        }
    }
}
