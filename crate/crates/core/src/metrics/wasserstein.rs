use crate::mdp::EmpiricalDistribution;
use crate::{Error, Result, RngStream, Scalar};

use super::DiscreteLaw;

/// Largest sample count accepted by [`exact_wasserstein_p`].
pub const MAX_ASSIGNMENT: usize = 256;
/// Largest atom count per side accepted by [`transport_cost`].
pub const MAX_TRANSPORT_ATOMS: usize = 64;

/// Exact `W_1` between two 1-d sample sets through the sorted coupling. The
/// larger set is subsampled without replacement to the smaller size.
pub fn wasserstein1_1d<S: Scalar>(p: &EmpiricalDistribution<S>, q: &EmpiricalDistribution<S>, rng: &mut RngStream) -> Result<f64> {
    if p.dim() != 1 || q.dim() != 1 {
        return Err(Error::UnsupportedDimension { dim: p.dim().max(q.dim()), reason: "the sorted coupling is 1-d" });
    }
    let m = p.len().min(q.len());
    let mut a = subsample(p.as_flat(), m, rng);
    let mut b = subsample(q.as_flat(), m, rng);
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / m as f64)
}

fn subsample<S: Scalar>(v: &[S], m: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut out: Vec<f64> = v.iter().map(|x| x.as_f64()).collect();
    if out.len() > m {
        for i in 0..m {
            let j = i + rng.index(out.len() - i);
            out.swap(i, j);
        }
        out.truncate(m);
    }
    out
}

fn dist_p(x: &[f64], y: &[f64], order: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    d2.sqrt().powf(order)
}

/// Exact `W_p` between equal-size empirical measures by optimal assignment.
pub fn exact_wasserstein_p<S: Scalar>(p: &EmpiricalDistribution<S>, q: &EmpiricalDistribution<S>, order: f64) -> Result<f64> {
    if !(order >= 1.0) {
        return Err(Error::InvalidArgument(format!("order {order} must be at least 1")));
    }
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: q.dim() });
    }
    if p.len() != q.len() {
        return Err(Error::InvalidArgument(format!("sample counts differ: {} vs {}", p.len(), q.len())));
    }
    let m = p.len();
    if m > MAX_ASSIGNMENT {
        return Err(Error::TooLarge(format!(
            "exact assignment is capped at {MAX_ASSIGNMENT} samples (got {m}); use wasserstein1_1d for large 1-d sets"
        )));
    }
    let a: Vec<Vec<f64>> = p.iter().map(|s| s.iter().map(|v| v.as_f64()).collect()).collect();
    let b: Vec<Vec<f64>> = q.iter().map(|s| s.iter().map(|v| v.as_f64()).collect()).collect();
    let cost: Vec<f64> = a.iter().flat_map(|x| b.iter().map(move |y| dist_p(x, y, order))).collect();
    let total = assignment_cost(&cost, m);
    Ok((total.max(0.0) / m as f64).powf(1.0 / order))
}

/// Minimum-cost perfect matching on an `n x n` cost matrix (Hungarian method,
/// potentials form).
fn assignment_cost(cost: &[f64], n: usize) -> f64 {
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| cost[(p[j] - 1) * n + (j - 1)]).sum()
}

/// Exact optimal transport cost `min E ||X - Y||^p` (that is `W_p^p`)
/// between weighted discrete laws, by successive shortest paths.
pub fn transport_cost(p: &DiscreteLaw, q: &DiscreteLaw, order: f64) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: q.dim() });
    }
    if p.len() > MAX_TRANSPORT_ATOMS || q.len() > MAX_TRANSPORT_ATOMS {
        return Err(Error::TooLarge(format!("exact transport is capped at {MAX_TRANSPORT_ATOMS} atoms per side")));
    }
    let (n, m) = (p.len(), q.len());
    let cost: Vec<f64> = p.atoms.iter().flat_map(|x| q.atoms.iter().map(move |y| dist_p(x, y, order))).collect();
    let mut supply = p.weights.clone();
    let mut demand = q.weights.clone();
    // flow[i*m+j] on the bipartite arcs; residual reverse arcs carry -cost
    let mut flow = vec![0.0; n * m];
    let eps = 1e-15;
    let scale = cost.iter().fold(0.0f64, |a, &c| a.max(c)).max(1e-300);
    let slack = 1e-12 * scale;
    let mut total = 0.0;
    // each augmentation saturates a supply, a demand or a reverse arc
    for _ in 0..4 * (n * m + n + m) {
        // Bellman-Ford from a virtual source connected to every supply node with
        // remaining supply; nodes 0..n supply, n..n+m demand
        let mut dist = vec![f64::INFINITY; n + m];
        let mut prev = vec![usize::MAX; n + m];
        for i in 0..n {
            if supply[i] > eps {
                dist[i] = 0.0;
            }
        }
        for _ in 0..n + m {
            let mut changed = false;
            for i in 0..n {
                if dist[i].is_finite() {
                    for j in 0..m {
                        let nd = dist[i] + cost[i * m + j];
                        if nd < dist[n + j] - slack {
                            dist[n + j] = nd;
                            prev[n + j] = i;
                            changed = true;
                        }
                    }
                }
            }
            for j in 0..m {
                if dist[n + j].is_finite() {
                    for i in 0..n {
                        if flow[i * m + j] > eps {
                            let nd = dist[n + j] - cost[i * m + j];
                            if nd < dist[i] - slack {
                                dist[i] = nd;
                                prev[i] = n + j;
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let target = (0..m).filter(|&j| demand[j] > eps && dist[n + j].is_finite()).min_by(|&a, &b| dist[n + a].total_cmp(&dist[n + b]));
        let Some(jt) = target else { return Ok(total) };
        // walk back to find the bottleneck
        let mut path = Vec::new();
        let mut node = n + jt;
        let mut bottleneck = demand[jt];
        loop {
            if path.len() > n + m {
                return Err(Error::InvalidArgument("transport residual graph has a cycle".into()));
            }
            let pv = prev[node];
            if pv == usize::MAX {
                bottleneck = bottleneck.min(supply[node]);
                break;
            }
            if node >= n {
                // forward arc pv -> node
                path.push((pv, node - n, 1.0));
            } else {
                // reverse arc: node <- pv means cancel flow on (node, pv - n)
                bottleneck = bottleneck.min(flow[node * m + (pv - n)]);
                path.push((node, pv - n, -1.0));
            }
            node = pv;
        }
        let source = node;
        for &(i, j, s) in &path {
            flow[i * m + j] += s * bottleneck;
            total += s * bottleneck * cost[i * m + j];
        }
        supply[source] -= bottleneck;
        demand[jt] -= bottleneck;
        if demand.iter().all(|&d| d <= eps) || supply.iter().all(|&s| s <= eps) || bottleneck <= eps {
            return Ok(total);
        }
    }
    Err(Error::InvalidArgument("transport did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn emp(v: Vec<f64>) -> EmpiricalDistribution<f64> {
        EmpiricalDistribution::from_scalars(v).unwrap()
    }

    #[test]
    fn w1_examples() {
        let mut rng = RngStream::new(0);
        let a = emp(vec![0.3, -1.0, 2.0]);
        assert_eq!(wasserstein1_1d(&a, &a, &mut rng).unwrap(), 0.0);
        assert!((wasserstein1_1d(&emp(vec![1.0]), &emp(vec![-2.5]), &mut rng).unwrap() - 3.5).abs() < 1e-15);
        let shifted = emp(vec![0.3 + 0.25, -1.0 + 0.25, 2.0 + 0.25]);
        assert!((wasserstein1_1d(&a, &shifted, &mut rng).unwrap() - 0.25).abs() < 1e-12);
        let two_d = EmpiricalDistribution::from_flat(2, vec![0.0, 0.0]).unwrap();
        assert!(wasserstein1_1d(&two_d, &two_d, &mut rng).is_err());
    }

    #[test]
    fn two_point_sets_match_brute_force() {
        let p = EmpiricalDistribution::from_flat(2, vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let q = EmpiricalDistribution::from_flat(2, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        // identity pairing: 0 + sqrt 2; swapped: 1 + 1
        let brute = (2f64.sqrt()).min(2.0) / 2.0;
        assert!((exact_wasserstein_p(&p, &q, 1.0).unwrap() - brute).abs() < 1e-12);
    }

    #[test]
    fn assignment_refuses_large_inputs() {
        let big = emp(vec![0.0; MAX_ASSIGNMENT + 1]);
        assert!(matches!(exact_wasserstein_p(&big, &big, 1.0), Err(Error::TooLarge(_))));
    }

    #[test]
    fn transport_between_point_masses() {
        let a = DiscreteLaw::point(vec![0.0]);
        let b = DiscreteLaw::point(vec![3.0]);
        assert!((transport_cost(&a, &b, 2.0).unwrap() - 9.0).abs() < 1e-12);
        let c = DiscreteLaw::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let d = DiscreteLaw::new(vec![vec![1.0], vec![2.0]], vec![0.5, 0.5]).unwrap();
        assert!((transport_cost(&c, &d, 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn assignment_agrees_with_sorted_coupling(v in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..40)) {
            let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let (p, q) = (emp(a), emp(b));
            let exact = exact_wasserstein_p(&p, &q, 1.0).unwrap();
            let sorted = wasserstein1_1d(&p, &q, &mut RngStream::new(1)).unwrap();
            prop_assert!((exact - sorted).abs() < 1e-9);
        }

        #[test]
        fn transport_matches_assignment_on_uniform_atoms(v in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0), 1..12)) {
            let n = v.len();
            let pa: Vec<Vec<f64>> = v.iter().map(|t| vec![t.0, t.1]).collect();
            let qa: Vec<Vec<f64>> = v.iter().map(|t| vec![t.2, t.3]).collect();
            let w = vec![1.0 / n as f64; n];
            let lp = transport_cost(&DiscreteLaw::new(pa.clone(), w.clone()).unwrap(), &DiscreteLaw::new(qa.clone(), w).unwrap(), 2.0).unwrap();
            let flat = |a: &Vec<Vec<f64>>| EmpiricalDistribution::from_flat(2, a.concat()).unwrap();
            let asg = exact_wasserstein_p(&flat(&pa), &flat(&qa), 2.0).unwrap().powi(2);
            prop_assert!((lp - asg).abs() < 1e-9, "{lp} vs {asg}");
        }

        #[test]
        fn triangle_inequality(v in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0), 1..20)) {
            let a = emp(v.iter().map(|t| t.0).collect());
            let b = emp(v.iter().map(|t| t.1).collect());
            let c = emp(v.iter().map(|t| t.2).collect());
            for order in [1.0, 2.0] {
                let ab = exact_wasserstein_p(&a, &b, order).unwrap();
                let bc = exact_wasserstein_p(&b, &c, order).unwrap();
                let ac = exact_wasserstein_p(&a, &c, order).unwrap();
                prop_assert!(ac <= ab + bc + 1e-9);
            }
        }
    }
}
