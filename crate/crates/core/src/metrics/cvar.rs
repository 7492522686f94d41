use crate::mdp::EmpiricalDistribution;
use crate::{Error, Result, Scalar};

use super::DiscreteLaw;

pub const DEFAULT_CVAR_GRID: usize = 10_001;

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidArgument(format!("tau {tau} must lie in (0, 1]")));
    }
    Ok(())
}

/// `max_b b - E[(b - Z)^+] / tau` over a uniform grid of `grid_size` points
/// spanning the sample range padded by one grid step.
pub fn cvar<S: Scalar>(samples: &EmpiricalDistribution<S>, tau: f64, grid_size: usize) -> Result<f64> {
    check_tau(tau)?;
    if samples.dim() != 1 {
        return Err(Error::UnsupportedDimension { dim: samples.dim(), reason: "CVaR is defined for scalar returns" });
    }
    if grid_size < 2 {
        return Err(Error::InvalidArgument("cvar grid needs at least two points".into()));
    }
    let mut z: Vec<f64> = samples.as_flat().iter().map(|v| v.as_f64()).collect();
    z.sort_by(f64::total_cmp);
    let n = z.len();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + z[i];
    }
    let (lo, hi) = (z[0], z[n - 1]);
    let step = (hi - lo) / (grid_size - 1) as f64;
    let (glo, ghi) = (lo - step, hi + step);
    let spacing = (ghi - glo) / (grid_size - 1) as f64;
    let mut best = f64::NEG_INFINITY;
    let mut k = 0;
    for g in 0..grid_size {
        let b = glo + spacing * g as f64;
        while k < n && z[k] < b {
            k += 1;
        }
        let shortfall = k as f64 * b - prefix[k];
        best = best.max(b - shortfall / (tau * n as f64));
    }
    Ok(best)
}

/// Exact CVaR of a scalar discrete law: the objective is concave and
/// piecewise linear with kinks at the atoms, so the maximum sits on an atom.
pub fn cvar_discrete(law: &DiscreteLaw, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if law.dim() != 1 {
        return Err(Error::UnsupportedDimension { dim: law.dim(), reason: "CVaR is defined for scalar returns" });
    }
    Ok(law
        .atoms
        .iter()
        .map(|b| {
            let b = b[0];
            let short: f64 = law.atoms.iter().zip(&law.weights).map(|(z, &w)| w * (b - z[0]).max(0.0)).sum();
            b - short / tau
        })
        .fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RngStream;

    #[test]
    fn point_mass_and_mean() {
        let c = EmpiricalDistribution::from_scalars(vec![0.7f64; 10]).unwrap();
        assert!((cvar(&c, 0.3, 101).unwrap() - 0.7).abs() < 1e-12);
        let v = EmpiricalDistribution::from_scalars(vec![0.0, 1.0, 2.0, 5.0]).unwrap();
        let step = 5.0 / 10_000.0;
        assert!((cvar(&v, 1.0, DEFAULT_CVAR_GRID).unwrap() - 2.0).abs() <= step);
    }

    #[test]
    fn uniform_lower_tail() {
        let mut rng = RngStream::new(9);
        let v = EmpiricalDistribution::from_scalars((0..10_000).map(|_| f64::unit(&mut rng)).collect()).unwrap();
        assert!((cvar(&v, 0.5, DEFAULT_CVAR_GRID).unwrap() - 0.25).abs() < 0.02);
    }

    #[test]
    fn discrete_matches_tail_average() {
        let law = DiscreteLaw::new(vec![vec![0.0], vec![1.0], vec![3.0]], vec![0.2, 0.3, 0.5]).unwrap();
        // worst 40%: 0.2 at 0 and 0.2 at 1 -> 0.5
        assert!((cvar_discrete(&law, 0.4).unwrap() - 0.5).abs() < 1e-12);
        assert!((cvar_discrete(&law, 1.0).unwrap() - 1.8).abs() < 1e-12);
    }
}
