use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    aggregate, evaluate_run, load_dataset, paper_value, run_dir, train, write_run, AlgorithmConfig, DataConfig,
    EnvironmentConfig, EvalConfig, EvalRow, ExperimentConfig, LoadedRun, Metric, PaperTable, Profile, ResultsRow,
};
use crate::theory::{run_theory_suite, write_theory_report, TheoryConfig, TheoryRow};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableId {
    Table1,
    Table2,
    TableW1,
    Theory,
}

impl TableId {
    pub fn name(self) -> &'static str {
        match self {
            TableId::Table1 => "table1",
            TableId::Table2 => "table2",
            TableId::TableW1 => "table_w1",
            TableId::Theory => "theory",
        }
    }
}

impl std::str::FromStr for TableId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table1" => Ok(TableId::Table1),
            "table2" => Ok(TableId::Table2),
            "table_w1" => Ok(TableId::TableW1),
            "theory" => Ok(TableId::Theory),
            other => Err(Error::Config(format!("unknown table {other:?} (expected table1, table2, table_w1 or theory)"))),
        }
    }
}

/// One line of a reproduction CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub h: usize,
    pub algorithm: String,
    pub metric: Metric,
    pub mean: f64,
    pub stderr: Option<f64>,
    pub paper_value: Option<f64>,
    /// Human-readable acceptance rule; `report only` for unchecked rows.
    pub tolerance: String,
    /// `None` for report-only rows.
    pub pass: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct ReproduceOutcome {
    pub table: TableId,
    pub rows: Vec<ReportRow>,
    pub theory: Vec<TheoryRow>,
    /// Stage failures; a non-empty list means the report is partial.
    pub failures: Vec<String>,
    pub csv_path: PathBuf,
    pub elapsed_secs: f64,
}

impl ReproduceOutcome {
    pub fn all_pass(&self) -> bool {
        self.failures.is_empty()
            && self.rows.iter().all(|r| r.pass != Some(false))
            && self.theory.iter().all(|r| r.pass)
    }

    /// Row for `(algorithm, h)`, if measured.
    pub fn row(&self, algorithm: &str, h: usize) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm && r.h == h)
    }
}

struct TablePlan {
    environment: EnvironmentConfig,
    algorithms: Vec<AlgorithmConfig>,
    metric: Metric,
    paper: PaperTable,
}

fn plan(table: TableId, profile: Profile) -> TablePlan {
    match table {
        TableId::Table1 => TablePlan {
            environment: EnvironmentConfig::scalar(),
            algorithms: vec![profile.categorical_td(false), profile.quantile_td(false), profile.gmm(false)],
            metric: Metric::Tv,
            paper: PaperTable::Table1,
        },
        TableId::TableW1 => TablePlan {
            environment: EnvironmentConfig::scalar(),
            algorithms: vec![profile.categorical_td(false), profile.quantile_td(true), profile.gmm(false)],
            metric: Metric::W1,
            paper: PaperTable::TableW1,
        },
        TableId::Table2 => TablePlan {
            environment: EnvironmentConfig::ring(),
            algorithms: vec![profile.categorical_td(true), profile.gmm(true)],
            metric: Metric::Tv,
            paper: PaperTable::Table2,
        },
        TableId::Theory => unreachable!("theory has no table plan"),
    }
}

/// Seeds used by every reproduction.
pub const REPRODUCE_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

/// Runs the full pipeline for one table and writes `<out>/<table>.csv` plus `<out>/<table>_report.md`.
pub fn reproduce(table: TableId, profile: Profile, out: &Path) -> Result<ReproduceOutcome> {
    let start = Instant::now();
    fs::create_dir_all(out)?;
    if table == TableId::Theory {
        let theory = run_theory_suite(&TheoryConfig::default())?;
        let csv_path = out.join("theory_report.csv");
        write_theory_report(&theory, &csv_path)?;
        let outcome = ReproduceOutcome {
            table,
            rows: Vec::new(),
            theory,
            failures: Vec::new(),
            csv_path,
            elapsed_secs: start.elapsed().as_secs_f64(),
        };
        write_markdown(&outcome, profile, out)?;
        return Ok(outcome);
    }
    let plan = plan(table, profile);
    let runs_root = out.join("runs").join(table.name());
    let configs: Vec<ExperimentConfig> = plan
        .algorithms
        .iter()
        .map(|algorithm| ExperimentConfig {
            environment: plan.environment.clone(),
            data: DataConfig { per_cell: profile.per_cell(), seed: None, path: None },
            algorithm: algorithm.clone(),
            seeds: REPRODUCE_SEEDS.to_vec(),
            eval: EvalConfig { metric: plan.metric, ..EvalConfig::default() },
            output: runs_root.clone(),
        })
        .collect();
    let jobs: Vec<(&ExperimentConfig, u64)> =
        configs.iter().flat_map(|c| REPRODUCE_SEEDS.iter().map(move |&s| (c, s))).collect();
    let steps: Vec<usize> = (1..=plan.environment.horizon).collect();
    let results: Vec<std::result::Result<Vec<EvalRow>, String>> = jobs
        .par_iter()
        .map(|&(cfg, seed)| {
            let t = Instant::now();
            let r = run_and_evaluate(cfg, seed, plan.metric, &steps)
                .map_err(|e| format!("{} seed {seed}: {e}", cfg.algorithm.name()));
            log::info!("{} seed {seed} finished in {:.1}s", cfg.algorithm.name(), t.elapsed().as_secs_f64());
            r
        })
        .collect();
    let mut evals = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rows) => evals.extend(rows),
            Err(e) => failures.push(e),
        }
    }
    let algorithms: Vec<&str> = plan.algorithms.iter().map(AlgorithmConfig::name).collect();
    let rows = judge(table, plan.paper, &algorithms, &aggregate(&evals));
    let csv_path = out.join(format!("{}.csv", table.name()));
    write_report_csv(&rows, &csv_path)?;
    let outcome = ReproduceOutcome {
        table,
        rows,
        theory: Vec::new(),
        failures,
        csv_path,
        elapsed_secs: start.elapsed().as_secs_f64(),
    };
    write_markdown(&outcome, profile, out)?;
    Ok(outcome)
}

fn run_and_evaluate(cfg: &ExperimentConfig, seed: u64, metric: Metric, steps: &[usize]) -> Result<Vec<EvalRow>> {
    let (data, data_seed) = load_dataset(cfg, seed)?;
    let estimator = train(cfg, &data, seed)?;
    let dir = run_dir(cfg, seed);
    let manifest = write_run(&dir, cfg, seed, &data, data_seed, &estimator)?;
    evaluate_run(&LoadedRun { dir, manifest, estimator }, metric, steps)
}

/// Acceptance rules per table. Rows outside the checked steps are report-only.
fn judge(table: TableId, paper: PaperTable, algorithms: &[&str], results: &[ResultsRow]) -> Vec<ReportRow> {
    let mean_of = |alg: &str, h: usize| results.iter().find(|r| r.algorithm == alg && r.h == h).map(|r| r.mean);
    let mut rows = Vec::new();
    for &alg in algorithms {
        for r in results.iter().filter(|r| r.algorithm == alg) {
            let (tolerance, pass) = rule(table, alg, r.h, r.mean, &mean_of);
            rows.push(ReportRow {
                h: r.h,
                algorithm: alg.to_owned(),
                metric: r.metric,
                mean: r.mean,
                stderr: r.stderr,
                paper_value: paper_value(paper, alg, r.h),
                tolerance,
                pass,
            });
        }
    }
    rows.sort_by(|a, b| a.h.cmp(&b.h).then_with(|| order(algorithms, &a.algorithm).cmp(&order(algorithms, &b.algorithm))));
    rows
}

fn order(algorithms: &[&str], name: &str) -> usize {
    algorithms.iter().position(|a| *a == name).unwrap_or(usize::MAX)
}

fn rule(
    table: TableId,
    alg: &str,
    h: usize,
    mean: f64,
    mean_of: &dyn Fn(&str, usize) -> Option<f64>,
) -> (String, Option<bool>) {
    let at_most = |bound: f64| (format!("<= {bound}"), Some(mean <= bound));
    match (table, alg) {
        (TableId::Table1, "fle-gmm") if matches!(h, 1 | 10 | 19) => at_most(0.10),
        (TableId::Table1, "cate-td") if matches!(h, 1 | 10 | 19) => at_most(0.15),
        (TableId::Table1, "quantile-td") if h == 1 => {
            let gmm = mean_of("fle-gmm", 1);
            (">= 2 x fle-gmm".to_owned(), Some(gmm.is_some_and(|g| mean >= 2.0 * g)))
        }
        (TableId::TableW1, "fle-gmm") if h == 1 => at_most(0.12),
        (TableId::TableW1, "quantile-td") if h == 1 => {
            let gmm = mean_of("fle-gmm", 1);
            (">= fle-gmm".to_owned(), Some(gmm.is_some_and(|g| mean >= g)))
        }
        (TableId::Table2, "cate-td") if matches!(h, 1 | 5 | 9) => {
            ("in [0.35, 0.60]".to_owned(), Some((0.35..=0.60).contains(&mean)))
        }
        (TableId::Table2, "fle-gmm") if matches!(h, 1 | 5 | 9) => at_most(0.60),
        _ => ("report only".to_owned(), None),
    }
}

pub const REPORT_COLUMNS: [&str; 8] = ["h", "algorithm", "metric", "mean", "stderr", "paper_value", "tolerance", "pass"];

fn write_report_csv(rows: &[ReportRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(REPORT_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.h.to_string(),
            r.algorithm.clone(),
            r.metric.name().to_owned(),
            format!("{:.6}", r.mean),
            r.stderr.map_or_else(|| "n/a".to_owned(), |s| format!("{s:.6}")),
            r.paper_value.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.3}")),
            r.tolerance.clone(),
            r.pass.map_or_else(|| "n/a".to_owned(), |p| p.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_markdown(outcome: &ReproduceOutcome, profile: Profile, out: &Path) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "# {} ({:?} profile)\n", outcome.table.name(), profile);
    let _ = writeln!(s, "Result: {}", if outcome.all_pass() { "all checks pass" } else { "FAILED" });
    let _ = writeln!(s, "Elapsed: {:.1}s\n", outcome.elapsed_secs);
    if outcome.table == TableId::Table2 {
        let _ = writeln!(
            s,
            "The diffusion-model FLE column of the original table is out of scope and absent here; \
             its best 2-d numbers are not reproducible with the model families in this crate.\n"
        );
    }
    let cate_below = outcome.table == TableId::Table2
        && outcome.rows.iter().any(|r| r.algorithm == "cate-td" && r.pass == Some(false) && r.mean < 0.35);
    if cate_below {
        let _ = writeln!(
            s,
            "The categorical baseline lands below the published band: here it is a joint 30 x 30 grid per \
             (cell, action) trained on exactly projected next-cell laws, not a network, so it does not show \
             the published approximation error.\n"
        );
    }
    for f in &outcome.failures {
        let _ = writeln!(s, "- stage failure: {f}");
    }
    for r in outcome.rows.iter().filter(|r| r.pass.is_some()) {
        let _ = writeln!(
            s,
            "- h={} {} {}: {:.4} (published {}) {} -> {}",
            r.h,
            r.algorithm,
            r.metric.name(),
            r.mean,
            r.paper_value.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.3}")),
            r.tolerance,
            if r.pass == Some(true) { "pass" } else { "FAIL" }
        );
    }
    for r in &outcome.theory {
        let _ = writeln!(s, "- {}: lhs {:.6} rhs {:.6} -> {}", r.check, r.lhs, r.rhs, if r.pass { "pass" } else { "FAIL" });
    }
    fs::write(out.join(format!("{}_report.md", outcome.table.name())), s)?;
    Ok(())
}
