use approx::assert_abs_diff_eq;
use dope_core::mdp::ActionId;
use dope_core::models::{ConditionalDensity, FeatureMap, FittedModel, ModelSpec, OptimizerConfig, RegressionTargets};
use dope_core::{RngStream, Scalar};
use proptest::prelude::*;

const X: [f64; 1] = [0.0];

fn targets_1d(values: &[f64]) -> RegressionTargets<f64> {
    let mut t = RegressionTargets::new(1, 1);
    for &v in values {
        t.push(&X, ActionId(0), &[v]).unwrap();
    }
    t
}

fn gaussian_sample(mean: f64, std: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = RngStream::new(seed);
    (0..n).map(|_| mean + std * <f64 as Scalar>::standard_normal(&mut rng)).collect()
}

fn gmm(k: usize) -> ModelSpec {
    ModelSpec::Gmm { components: k, optimizer: OptimizerConfig::adam(1e-2, 1500) }
}

fn fit(spec: &ModelSpec, t: &RegressionTargets<f64>) -> FittedModel<f64> {
    spec.fit(FeatureMap::Constant, 1, t, &RngStream::new(7)).unwrap().model
}

#[test]
fn gmm_recovers_a_single_gaussian() {
    let model = fit(&gmm(10), &targets_1d(&gaussian_sample(0.5, 0.1, 2000, 1)));
    let mut rng = RngStream::new(2);
    let draws: Vec<f64> = (0..20_000).map(|_| model.sample(&X, ActionId(0), &mut rng)[0]).collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / draws.len() as f64;
    assert_abs_diff_eq!(mean, 0.5, epsilon = 0.02);
    assert_abs_diff_eq!(var.sqrt(), 0.1, epsilon = 0.03);
}

#[test]
fn gmm_density_integrates_to_one() {
    let model = fit(&gmm(3), &targets_1d(&gaussian_sample(-0.2, 0.3, 500, 3)));
    let (lo, hi, n) = (-4.0, 4.0, 16_000);
    let dz = (hi - lo) / n as f64;
    let mass: f64 = (0..n).map(|i| model.log_density(&X, ActionId(0), &[lo + (i as f64 + 0.5) * dz]).exp() * dz).sum();
    assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-3);
}

#[test]
fn gmm_survives_a_degenerate_sample() {
    let model = fit(&gmm(4), &targets_1d(&[0.3; 200]));
    let at = model.log_density(&X, ActionId(0), &[0.3]);
    let away = model.log_density(&X, ActionId(0), &[1.3]);
    assert!(at.is_finite() && away.is_finite());
    assert!(at > away);
    let mut rng = RngStream::new(0);
    assert!((model.sample(&X, ActionId(0), &mut rng)[0] - 0.3).abs() < 0.05);
}

#[test]
fn standard_normal_log_density_at_mean() {
    let spec = ModelSpec::FixedGaussian { sigma: 1.0, optimizer: OptimizerConfig::adam(0.1, 500) };
    let model = fit(&spec, &targets_1d(&[0.0, 0.0]));
    assert_abs_diff_eq!(model.log_density(&X, ActionId(0), &[0.0]), -0.9189, epsilon = 1e-4);
}

#[test]
fn fixed_gaussian_mean_is_per_cell_average() {
    let feature = FeatureMap::OneHot { size: 2 };
    let mut t = RegressionTargets::new(2, 1);
    for (x, z) in [([1.0, 0.0], 1.0), ([1.0, 0.0], 3.0), ([0.0, 1.0], -1.0), ([0.0, 1.0], -2.0), ([0.0, 1.0], -3.0)] {
        t.push(&x, ActionId(0), &[z]).unwrap();
    }
    let spec = ModelSpec::FixedGaussian { sigma: 0.5, optimizer: OptimizerConfig::adam(0.1, 2000) };
    let FittedModel::FixedGaussian(m) = spec.fit(feature, 1, &t, &RngStream::new(0)).unwrap().model else {
        panic!("wrong family");
    };
    assert_abs_diff_eq!(m.mean(&[1.0, 0.0], ActionId(0))[0], 2.0, epsilon = 1e-3);
    assert_abs_diff_eq!(m.mean(&[0.0, 1.0], ActionId(0))[0], -2.0, epsilon = 1e-3);
}

#[test]
fn categorical_matches_atom_frequencies() {
    // atoms at 0, 0.5, 1
    let spec = ModelSpec::Categorical {
        atoms: vec![3],
        range: Some(vec![[0.0, 1.0]]),
        optimizer: OptimizerConfig::adam(0.1, 2000),
    };
    let mut values = vec![0.0; 20];
    values.extend([1.0; 80]);
    let FittedModel::Categorical(m) = fit(&spec, &targets_1d(&values)) else { panic!("wrong family") };
    let p = m.probs(&X, ActionId(0));
    assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(p[0], 0.2, epsilon = 0.01);
    assert!(p[1] < 0.01);
    assert_abs_diff_eq!(p[2], 0.8, epsilon = 0.01);
}

#[test]
fn json_round_trip_preserves_densities() {
    let model = fit(&gmm(3), &targets_1d(&gaussian_sample(1.0, 0.5, 300, 9)));
    let back = FittedModel::<f64>::from_json(&model.to_json().unwrap()).unwrap();
    for z in [-1.0, 0.0, 0.7, 2.5] {
        assert_eq!(model.log_density(&X, ActionId(0), &[z]), back.log_density(&X, ActionId(0), &[z]));
    }

    let cat = ModelSpec::Categorical { atoms: vec![5], range: None, optimizer: OptimizerConfig::adam(0.1, 100) };
    let model = fit(&cat, &targets_1d(&[0.0, 0.1, 0.4, 1.0]));
    let back = FittedModel::<f64>::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(model, back);
}

#[test]
fn non_finite_targets_rejected() {
    assert!(gmm(2).fit(FeatureMap::Constant, 1, &targets_1d(&[0.0, f64::NAN]), &RngStream::new(0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fitting_never_lowers_the_likelihood(
        values in prop::collection::vec(-3.0f64..3.0, 2..60),
        k in 1usize..5,
        seed in 0u64..1000,
    ) {
        let spec = ModelSpec::Gmm { components: k, optimizer: OptimizerConfig::adam(5e-2, 60) };
        let out = spec.fit(FeatureMap::Constant, 1, &targets_1d(&values), &RngStream::new(seed)).unwrap();
        prop_assert!(out.final_objective >= out.initial_objective);
        prop_assert!(out.final_objective.is_finite());
    }

    #[test]
    fn categorical_probabilities_sum_to_one(values in prop::collection::vec(-2.0f64..2.0, 1..40)) {
        let spec = ModelSpec::Categorical { atoms: vec![7], range: None, optimizer: OptimizerConfig::adam(0.1, 50) };
        let FittedModel::Categorical(m) = fit(&spec, &targets_1d(&values)) else { unreachable!() };
        let p = m.probs(&X, ActionId(0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&q| q >= 0.0));
    }
}
