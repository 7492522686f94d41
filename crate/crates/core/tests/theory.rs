use dope_core::env::TabularMdp;
use dope_core::models::OptimizerConfig;
use dope_core::theory::{
    coverage_constant_tabular, dominance_suite, error_rate_sweep, fqe_reduction_gap, median, reference_policy,
    tabular_fle_error,
};

fn optimizer() -> OptimizerConfig {
    OptimizerConfig::adam(0.05, 2000).with_early_stop(1e-10, 20)
}

#[test]
fn small_sample_sweep_errors_are_valid_distances() {
    let mdp = TabularMdp::reference_four_state();
    let rows = error_rate_sweep(&mdp, &reference_policy(&mdp), &optimizer(), &[100], &[1, 2, 3]).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].errors.iter().all(|e| (0.0..=1.0).contains(e)));
    assert_eq!(rows[0].median, median(&rows[0].errors));
}

#[test]
fn tabular_error_is_deterministic_per_seed() {
    let mdp = TabularMdp::reference_four_state();
    let policy = reference_policy(&mdp);
    let a = tabular_fle_error(&mdp, &policy, 2000, 11, &optimizer()).unwrap();
    let b = tabular_fle_error(&mdp, &policy, 2000, 11, &optimizer()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn more_data_helps_on_average() {
    let mdp = TabularMdp::reference_four_state();
    let rows = error_rate_sweep(&mdp, &reference_policy(&mdp), &optimizer(), &[500, 20_000], &[1, 2, 3]).unwrap();
    assert!(rows[1].median < rows[0].median);
}

#[test]
fn median_handles_even_and_empty() {
    assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), 2.5);
    assert!(median(&[]).is_nan());
}

#[test]
fn dominance_holds_on_every_pair() {
    let rows = dominance_suite(30, 4).unwrap();
    assert!(rows.iter().all(|r| r.pass));
}

#[test]
fn fqe_matches_fle_means() {
    let mdp = TabularMdp::reference_four_state();
    assert!(fqe_reduction_gap(&mdp, 5000, 2).unwrap() <= 1e-6);
}

#[test]
fn uniform_logging_covers_the_reference_policy() {
    let mdp = TabularMdp::reference_four_state();
    let rho = vec![vec![1.0 / mdp.num_pairs() as f64; mdp.num_pairs()]; 3];
    let c = coverage_constant_tabular(&mdp, &reference_policy(&mdp), &rho).unwrap();
    assert!(c.value.is_finite() && c.value >= 1.0);
}
