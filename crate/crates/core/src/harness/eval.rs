use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{load_run, ExperimentConfig, LoadedRun};
use crate::env::CombinationLock;
use crate::fle::conditional_model_samples;
use crate::mdp::{conditional_returns, Policy};
use crate::metrics::{empirical_tv, wasserstein1_1d, HistogramSpec};
use crate::models::FittedModel;
use crate::{Error, Result, RngStream};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    #[default]
    Tv,
    W1,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Tv => "tv",
            Metric::W1 => "w1",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tv" => Ok(Metric::Tv),
            "w1" => Ok(Metric::W1),
            other => Err(Error::Config(format!("unknown metric {other:?} (expected tv or w1)"))),
        }
    }
}

/// Histogram used for TV: the configured one, else 100 bins on `[-1.5, 1.5]`
/// in 1-d and 30 x 30 on `[-4, 4]^2` in 2-d.
pub fn histogram_for(cfg: &ExperimentConfig) -> Result<HistogramSpec> {
    let d = cfg.environment.reward.dim();
    let (bins, range) = match d {
        1 => (100, [-1.5, 1.5]),
        _ => (30, [-4.0, 4.0]),
    };
    let bins = cfg.eval.bins.unwrap_or(bins);
    let ranges = cfg.eval.range.clone().unwrap_or_else(|| vec![range; d]);
    HistogramSpec::new(vec![bins; d], ranges)
}

/// Distance at step `h` between `E_{x ~ psi(0, h)} f_h(x, a*_h)` and the true
/// conditional return, sampled by rolling out `policy` from the good chain at
/// `h` after forcing `a*_h`.
#[allow(clippy::too_many_arguments)]
pub fn step_metric(
    env: &CombinationLock,
    policy: &Policy<f64>,
    model: &FittedModel<f64>,
    h: usize,
    metric: Metric,
    samples: usize,
    hist: &HistogramSpec,
    rng: &RngStream,
) -> Result<f64> {
    let a = env.optimal_action(h);
    let truth = conditional_returns(env, policy, &0, h, a, samples, &mut rng.derive("truth"))?;
    let fitted = conditional_model_samples(model, |r| env.observe_with_noise(0, h, r), a, samples, &mut rng.derive("model"))?;
    match metric {
        Metric::Tv => empirical_tv(&fitted, &truth, hist),
        Metric::W1 => wasserstein1_1d(&fitted, &truth, &mut rng.derive("w1")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub algorithm: String,
    pub seed: u64,
    pub h: usize,
    pub metric: Metric,
    pub value: f64,
}

pub fn evaluate_run(run: &LoadedRun, metric: Metric, steps: &[usize]) -> Result<Vec<EvalRow>> {
    let cfg = &run.manifest.config;
    let env = cfg.environment.build()?;
    let policy = cfg.environment.policy(&env)?;
    let hist = histogram_for(cfg)?;
    let horizon = cfg.environment.horizon;
    if let Some(&bad) = steps.iter().find(|&&h| h == 0 || h > horizon) {
        return Err(Error::Config(format!("step {bad} outside 1..={horizon}")));
    }
    let seed = run.manifest.seed;
    steps
        .par_iter()
        .map(|&h| {
            let rng = RngStream::new(seed).derive_indexed("eval", h as u64);
            let value = step_metric(&env, &policy, run.estimator.model(h), h, metric, cfg.eval.samples, &hist, &rng)
                .map_err(|e| e.context(format!("{} step {h}", run.dir.display())))?;
            Ok(EvalRow { algorithm: run.manifest.algorithm.clone(), seed, h, metric, value })
        })
        .collect()
}

/// Mean and standard error over seeds for one `(h, algorithm, metric)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub h: usize,
    pub algorithm: String,
    pub metric: Metric,
    pub mean: f64,
    /// `None` with fewer than two seeds.
    pub stderr: Option<f64>,
    pub seeds: usize,
}

pub fn aggregate(rows: &[EvalRow]) -> Vec<ResultsRow> {
    let mut cells: BTreeMap<(String, usize, Metric), Vec<f64>> = BTreeMap::new();
    for r in rows {
        cells.entry((r.algorithm.clone(), r.h, r.metric)).or_default().push(r.value);
    }
    cells
        .into_iter()
        .map(|((algorithm, h, metric), v)| {
            let k = v.len() as f64;
            let mean = v.iter().sum::<f64>() / k;
            let stderr = (v.len() >= 2).then(|| {
                let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
                (var / k).sqrt()
            });
            ResultsRow { h, algorithm, metric, mean, stderr, seeds: v.len() }
        })
        .collect()
}

/// Loads every run directory, evaluates the requested steps (every step when
/// empty) and aggregates across seeds.
pub fn evaluate_runs(dirs: &[PathBuf], metric: Metric, steps: &[usize]) -> Result<Vec<ResultsRow>> {
    let mut rows = Vec::new();
    for dir in dirs {
        let run = load_run(dir)?;
        let steps: Vec<usize> =
            if steps.is_empty() { (1..=run.manifest.config.environment.horizon).collect() } else { steps.to_vec() };
        rows.extend(evaluate_run(&run, metric, &steps)?);
    }
    Ok(aggregate(&rows))
}

pub fn write_results_csv(rows: &[ResultsRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["h", "algorithm", "metric", "mean", "stderr"])?;
    for r in rows {
        w.write_record([
            r.h.to_string(),
            r.algorithm.clone(),
            r.metric.name().to_owned(),
            format!("{:.6}", r.mean),
            r.stderr.map_or_else(|| "n/a".to_owned(), |s| format!("{s:.6}")),
        ])?;
    }
    w.flush()?;
    Ok(())
}
