use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use dope_core::harness::{
    cmd_gen_data, evaluate_runs, load_dataset, reproduce, run_dir, train, write_results_csv, write_run,
    ExperimentConfig, Metric, Profile, TableId,
};

#[derive(Parser)]
#[command(name = "dope", version, about = "Distributional offline policy evaluation experiments")]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the offline dataset described by a config (CSV plus JSON manifest).
    GenData {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train the configured algorithm and write per-step models and a run manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run seed; every seed listed in the config when absent.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate run directories against the ground-truth sampler.
    Eval {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "tv")]
        metric: Metric,
        /// Comma-separated steps; every step when absent.
        #[arg(long, value_delimiter = ',')]
        steps: Vec<usize>,
        /// Write the results CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate a results table end to end and compare with the published values.
    Reproduce {
        #[arg(long)]
        table: TableId,
        #[arg(long, default_value = "desk")]
        profile: Profile,
        #[arg(long)]
        out: PathBuf,
    },
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("DOPE_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("DOPE_THREADS={v:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

/// `Ok(true)` when every requested check passed.
fn execute(command: Command) -> Result<bool> {
    match command {
        Command::GenData { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (path, manifest) = cmd_gen_data(&cfg)?;
            println!("wrote {} rows to {} (seed {}, sha256 {})", manifest.rows, path.display(), manifest.seed, manifest.sha256);
            Ok(true)
        }
        Command::Run { config, seed } => {
            let cfg = ExperimentConfig::load(&config)?;
            let seeds = seed.map_or_else(|| cfg.seeds.clone(), |s| vec![s]);
            for s in seeds {
                let (data, data_seed) = load_dataset(&cfg, s)?;
                let est = train(&cfg, &data, s)?;
                let dir = run_dir(&cfg, s);
                let manifest = write_run(&dir, &cfg, s, &data, data_seed, &est)?;
                println!("{} seed {s}: {} models in {}", manifest.algorithm, manifest.models.len(), dir.display());
            }
            Ok(true)
        }
        Command::Eval { runs, metric, steps, out } => {
            let rows = evaluate_runs(&runs, metric, &steps)?;
            match out {
                Some(path) => write_results_csv(&rows, fs::File::create(&path)?)?,
                None => write_results_csv(&rows, io::stdout().lock())?,
            }
            Ok(true)
        }
        Command::Reproduce { table, profile, out } => {
            let outcome = reproduce(table, profile, &out)?;
            let mut stdout = io::stdout().lock();
            for r in outcome.rows.iter().filter(|r| r.pass.is_some()) {
                writeln!(
                    stdout,
                    "h={:<2} {:<12} {} = {:.4}  ({})  {}",
                    r.h,
                    r.algorithm,
                    r.metric.name(),
                    r.mean,
                    r.tolerance,
                    if r.pass == Some(true) { "PASS" } else { "FAIL" }
                )?;
            }
            dope_core::theory::print_rows(&outcome.theory, &mut stdout)?;
            for f in &outcome.failures {
                writeln!(stdout, "stage failure: {f}")?;
            }
            writeln!(stdout, "report: {} ({:.1}s)", outcome.csv_path.display(), outcome.elapsed_secs)?;
            Ok(outcome.all_pass())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = init_threads().and_then(|()| execute(cli.command));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("dope: some checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("dope: {e:#}");
            ExitCode::from(2)
        }
    }
}
