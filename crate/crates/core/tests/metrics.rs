use approx::assert_abs_diff_eq;
use dope_core::env::TabularMdp;
use dope_core::mdp::{EmpiricalDistribution, Horizon, Policy};
use dope_core::metrics::{
    check_contraction, cvar_discrete, empirical_tv, exact_wasserstein_p, transport_cost, wasserstein1_1d, DiscreteLaw,
    HistogramSpec,
};
use dope_core::models::QuantileModel;
use dope_core::{RngStream, Scalar};
use proptest::prelude::*;

fn normal(mean: f64, n: usize, seed: u64) -> EmpiricalDistribution<f64> {
    let mut rng = RngStream::new(seed);
    EmpiricalDistribution::from_scalars((0..n).map(|_| mean + 0.1 * <f64 as Scalar>::standard_normal(&mut rng)).collect())
        .unwrap()
}

#[test]
fn separated_laws_have_tv_near_one() {
    let spec = HistogramSpec::uniform(1, 50, -2.0, 2.0).unwrap();
    let tv = empirical_tv(&normal(-1.0, 5000, 1), &normal(1.0, 5000, 2), &spec).unwrap();
    assert!(tv >= 0.99);
    assert_eq!(empirical_tv(&normal(0.0, 100, 3), &normal(0.0, 100, 3), &spec).unwrap(), 0.0);
}

#[test]
fn shifted_sample_has_w1_equal_to_shift() {
    let p = normal(0.0, 1000, 5);
    let q = EmpiricalDistribution::from_scalars(p.as_flat().iter().map(|v| v + 0.3).collect()).unwrap();
    assert_abs_diff_eq!(wasserstein1_1d(&p, &q, &mut RngStream::new(0)).unwrap(), 0.3, epsilon = 1e-12);
}

#[test]
fn sorted_coupling_refuses_vectors() {
    let p = EmpiricalDistribution::new(vec![vec![0.0, 1.0]]).unwrap();
    assert!(wasserstein1_1d(&p, &p, &mut RngStream::new(0)).is_err());
}

#[test]
fn discrete_law_tv_and_transport() {
    let p = DiscreteLaw::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
    let q = DiscreteLaw::point(vec![0.0]);
    assert_abs_diff_eq!(p.tv(&q), 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(transport_cost(&p, &q, 1.0).unwrap(), 0.5, epsilon = 1e-12);
    assert!(DiscreteLaw::new(vec![vec![0.0]], vec![0.7]).is_err());
}

#[test]
fn cvar_of_two_point_law() {
    // lower 25% tail of {0 w.p. 0.5, 1 w.p. 0.5} sits entirely on 0
    let p = DiscreteLaw::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
    assert_abs_diff_eq!(cvar_discrete(&p, 0.25).unwrap(), 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(cvar_discrete(&p, 1.0).unwrap(), 0.5, epsilon = 1e-12);
}

fn point_model(mdp: &TabularMdp, values: &[f64]) -> QuantileModel<f64> {
    QuantileModel::new(mdp.feature_map(), 2, values.iter().map(|&v| vec![v]).collect()).unwrap()
}

fn mdp_policy(mdp: &TabularMdp) -> Policy<f64> {
    Policy::uniform(mdp.feature_map(), 2).unwrap()
}

#[test]
fn contraction_is_trivial_for_identical_models() {
    let mdp = TabularMdp::reference_two_state(0.5).unwrap();
    let f = point_model(&mdp, &[0.1, 0.2, 0.3, 0.4]);
    let out = check_contraction(&mdp, &mdp_policy(&mdp), &f, &f, 1.0, 50, 0.0, &RngStream::new(0)).unwrap();
    assert_eq!(out.lhs, 0.0);
    assert!(out.pass);
}

#[test]
fn small_discount_contracts_strongly() {
    let mdp = TabularMdp::reference_two_state(0.1).unwrap();
    let f = point_model(&mdp, &[0.0, 0.0, 0.0, 0.0]);
    let g = point_model(&mdp, &[1.0, -1.0, 2.0, 0.5]);
    let out = check_contraction(&mdp, &mdp_policy(&mdp), &f, &g, 1.0, 200, 0.05, &RngStream::new(1)).unwrap();
    assert!(out.pass);
    assert!(out.lhs / out.rhs <= 0.1f64.sqrt() * 1.05, "ratio {}", out.lhs / out.rhs);
}

#[test]
fn contraction_needs_a_discount() {
    let mdp = TabularMdp::reference_two_state(0.5).unwrap().with_horizon(Horizon::Finite { steps: 2 }).unwrap();
    let f = point_model(&mdp, &[0.0; 4]);
    assert!(check_contraction(&mdp, &mdp_policy(&mdp), &f, &f, 1.0, 10, 0.0, &RngStream::new(0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn assignment_matches_sorted_coupling_in_one_dimension(
        pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..30),
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let p = EmpiricalDistribution::from_scalars(a).unwrap();
        let q = EmpiricalDistribution::from_scalars(b).unwrap();
        let sorted = wasserstein1_1d(&p, &q, &mut RngStream::new(0)).unwrap();
        let exact = exact_wasserstein_p(&p, &q, 1.0).unwrap();
        prop_assert!((sorted - exact).abs() <= 1e-9 * (1.0 + exact));
    }

    #[test]
    fn tv_is_a_bounded_symmetric_distance(
        a in prop::collection::vec(-1.0f64..1.0, 1..50),
        b in prop::collection::vec(-1.0f64..1.0, 1..50),
    ) {
        let spec = HistogramSpec::uniform(1, 10, -1.0, 1.0).unwrap();
        let p = EmpiricalDistribution::from_scalars(a).unwrap();
        let q = EmpiricalDistribution::from_scalars(b).unwrap();
        let pq = empirical_tv(&p, &q, &spec).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&pq));
        prop_assert!((pq - empirical_tv(&q, &p, &spec).unwrap()).abs() < 1e-12);
    }
}
