use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use chanpred_cli::cache::ModelCache;
use chanpred_cli::config::{ExperimentConfig, SnrSection, Task};
use chanpred_cli::estimate::run_estimate;
use chanpred_cli::gen::run_gen;
use chanpred_cli::predict::run_predict;
use chanpred_cli::results::emit_results;

/// NMSE-vs-SNR experiments for MMSE channel estimators and predictors.
#[derive(Parser)]
#[command(name = "chanpred", version)]
struct Cli {
    /// Print the default configuration for a task (predict | estimate) and exit.
    #[arg(
        long,
        value_name = "TASK",
        num_args = 0..=1,
        default_missing_value = "predict"
    )]
    print_default_config: Option<String>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the channel prediction experiment.
    Predict(RunArgs),
    /// Run the channel estimation experiment.
    Estimate(RunArgs),
    /// Generate a synthetic channel file for the configured task.
    Gen(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the SNR sweep: "start:stop:step" or a single value in dB.
    #[arg(long)]
    snr: Option<String>,
    /// Disable the trained-model cache.
    #[arg(long)]
    no_cache: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output channel file.
    #[arg(long)]
    out: PathBuf,
    /// Realization count (prediction: groups; estimation: vectors).
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_snr(text: &str) -> Result<SnrSection> {
    let parts: Vec<&str> = text.split(':').collect();
    let parse = |s: &str| -> Result<f64> {
        s.parse::<f64>().with_context(|| format!("bad SNR value '{s}'"))
    };
    match parts.as_slice() {
        [v] => {
            let v = parse(v)?;
            Ok(SnrSection {
                start_db: v,
                stop_db: v,
                step_db: 1.0,
            })
        }
        [a, b, c] => Ok(SnrSection {
            start_db: parse(a)?,
            stop_db: parse(b)?,
            step_db: parse(c)?,
        }),
        _ => bail!("--snr expects 'value' or 'start:stop:step', got '{text}'"),
    }
}

fn load_with_overrides(args: &RunArgs, task: Task) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    cfg.task = task;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.io.out = out.clone();
    }
    if let Some(snr) = &args.snr {
        cfg.snr = parse_snr(snr)?;
    }
    Ok(cfg)
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(task) = cli.print_default_config {
        let task = match task.as_str() {
            "predict" => Task::Predict,
            "estimate" => Task::Estimate,
            other => bail!("unknown task '{other}' (expected predict or estimate)"),
        };
        print!("{}", ExperimentConfig::default_for(task).to_toml());
        return Ok(());
    }
    let Some(command) = cli.command else {
        bail!("no subcommand given; try --help");
    };
    match command {
        Command::Predict(args) => {
            let cfg = load_with_overrides(&args, Task::Predict)?;
            let cache = ModelCache::new(&cfg, !args.no_cache);
            let rows = run_predict(&cfg, &cache)?;
            emit_results(&rows, &cfg.io.out)?;
        }
        Command::Estimate(args) => {
            let cfg = load_with_overrides(&args, Task::Estimate)?;
            let cache = ModelCache::new(&cfg, !args.no_cache);
            let rows = run_estimate(&cfg, &cache)?;
            emit_results(&rows, &cfg.io.out)?;
        }
        Command::Gen(args) => {
            let mut cfg = ExperimentConfig::load(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            run_gen(&cfg, &args.out, args.count)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
