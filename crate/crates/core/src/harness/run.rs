use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{AlgorithmConfig, ExperimentConfig};
use crate::baselines::{categorical_td_run, quantile_td_run};
use crate::fle::{fle_finite, FitRecord, ReturnEstimator};
use crate::models::FittedModel;
use crate::{derive_seed, Dataset, Error, Result, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataManifest {
    pub env_id: String,
    pub seed: u64,
    pub per_cell: usize,
    pub rows: usize,
    pub sha256: String,
}

/// Seed the dataset of a run is generated from.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> u64 {
    cfg.data.seed.unwrap_or_else(|| derive_seed(seed, "data"))
}

/// SHA-256 over the bit patterns of every tuple.
pub fn dataset_hash(data: &Dataset) -> String {
    let mut h = Sha256::new();
    for t in data.iter() {
        h.update((t.step.unwrap_or(0) as u64).to_le_bytes());
        for v in t.x.iter().chain(&t.r).chain(&t.x_next) {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update((t.a.0 as u64).to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// The run's dataset: read from `data.path` when that file exists, otherwise generated.
/// Returns the dataset and the generation seed (`None` when read from disk).
pub fn load_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<(Dataset, Option<u64>)> {
    let env = cfg.environment.build()?;
    if let Some(path) = cfg.data.path.as_deref().filter(|p| p.exists()) {
        let file = fs::File::open(path)?;
        let data = Dataset::read_csv(std::io::BufReader::new(file), env.dataset_meta())?;
        return Ok((data, None));
    }
    let data_seed = run_seed(cfg, seed);
    let data = env.generate_offline_dataset(cfg.data.per_cell, &mut RngStream::new(data_seed))?;
    Ok((data, Some(data_seed)))
}

/// Writes the dataset CSV (to `data.path`, or `<output>/data.csv`) and a JSON manifest next to it.
pub fn cmd_gen_data(cfg: &ExperimentConfig) -> Result<(PathBuf, DataManifest)> {
    let env = cfg.environment.build()?;
    let seed = cfg.data.seed.unwrap_or_else(|| run_seed(cfg, cfg.seeds[0]));
    let data: Dataset = env.generate_offline_dataset(cfg.data.per_cell, &mut RngStream::new(seed))?;
    let path = cfg.data.path.clone().unwrap_or_else(|| cfg.output.join("data.csv"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    data.write_csv(BufWriter::new(fs::File::create(&path)?))?;
    let manifest = DataManifest {
        env_id: data.meta().env_id.clone(),
        seed,
        per_cell: cfg.data.per_cell,
        rows: data.len(),
        sha256: hex::encode(Sha256::digest(fs::read(&path)?)),
    };
    fs::write(manifest_path(&path), serde_json::to_string_pretty(&manifest)?)?;
    Ok((path, manifest))
}

fn manifest_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn train(cfg: &ExperimentConfig, data: &Dataset, seed: u64) -> Result<ReturnEstimator<f64>> {
    let env = cfg.environment.build()?;
    let policy = cfg.environment.policy(&env)?;
    let h = cfg.environment.horizon;
    let rng = RngStream::new(seed).derive("train");
    let est = match &cfg.algorithm {
        AlgorithmConfig::CateTd { .. } => {
            categorical_td_run(data, &cfg.algorithm.categorical_td_config(h).expect("cate-td"), &policy, &rng)
        }
        AlgorithmConfig::QuantileTd { .. } => {
            quantile_td_run(data, &cfg.algorithm.quantile_td_config(h).expect("quantile-td"), &policy, &rng)
        }
        other => fle_finite(data, &other.fle_config(h).expect("fle algorithm"), &policy, &rng),
    };
    est.map_err(|e| e.context(format!("{} seed {seed}", cfg.algorithm.name())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub step: usize,
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub algorithm: String,
    pub seed: u64,
    pub data_seed: Option<u64>,
    pub dataset_sha256: String,
    pub config: ExperimentConfig,
    pub records: Vec<FitRecord>,
    pub models: Vec<ModelFile>,
}

pub fn run_dir(cfg: &ExperimentConfig, seed: u64) -> PathBuf {
    cfg.output.join(cfg.algorithm.name()).join(format!("seed-{seed}"))
}

/// Writes `model_h{h}.json` per step and `run_manifest.json` into `dir`.
pub fn write_run(
    dir: &Path,
    cfg: &ExperimentConfig,
    seed: u64,
    data: &Dataset,
    data_seed: Option<u64>,
    est: &ReturnEstimator<f64>,
) -> Result<RunManifest> {
    fs::create_dir_all(dir)?;
    let mut models = Vec::with_capacity(est.models.len());
    for (i, m) in est.models.iter().enumerate() {
        let file = format!("model_h{}.json", i + 1);
        let json = m.to_json()?;
        fs::write(dir.join(&file), &json)?;
        models.push(ModelFile { step: i + 1, file, sha256: hex::encode(Sha256::digest(json.as_bytes())) });
    }
    let manifest = RunManifest {
        algorithm: cfg.algorithm.name().to_owned(),
        seed,
        data_seed,
        dataset_sha256: dataset_hash(data),
        config: cfg.clone(),
        records: est.records.clone(),
        models,
    };
    fs::write(dir.join("run_manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub estimator: ReturnEstimator<f64>,
}

/// Reads a run directory; fails with the list of missing step models.
pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let text = fs::read_to_string(dir.join("run_manifest.json"))
        .map_err(|e| Error::Validation(format!("{}: no readable run_manifest.json ({e})", dir.display())))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    let h = manifest.config.environment.horizon;
    let missing: Vec<usize> = (1..=h)
        .filter(|&s| !manifest.models.iter().any(|m| m.step == s && dir.join(&m.file).exists()))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation(format!("{}: missing models for steps {missing:?}", dir.display())));
    }
    let mut models = Vec::with_capacity(h);
    for s in 1..=h {
        let file = &manifest.models.iter().find(|m| m.step == s).expect("checked above").file;
        models.push(FittedModel::from_json(&fs::read_to_string(dir.join(file))?)?);
    }
    let estimator = ReturnEstimator { models, records: manifest.records.clone() };
    Ok(LoadedRun { dir: dir.to_path_buf(), manifest, estimator })
}
