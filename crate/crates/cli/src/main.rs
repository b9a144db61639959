use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmpl_cli::{run_experiment, ConfigError, ExperimentConfig, ExperimentKind, Overrides, RunError};

/// Planning-then-populating simulator: drift, scheduling and generation experiments.
#[derive(Parser)]
#[command(name = "mmpl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Behaviour-cloning regret grid and autoregressive-vs-planned drift curves.
    Drift(CommonArgs),
    /// Multi-worker schedules: makespan, speedup, peak memory and Gantt charts.
    Schedule(CommonArgs),
    /// Generate a toy video and check threaded execution against sequential.
    Generate(CommonArgs),
    /// Drift curves plus a one-line summary with the drift ratio.
    Compare(CommonArgs),
    /// Parse and validate a configuration, then print it with defaults filled in.
    ValidateConfig(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: config `out`, then $MMPL_OUT, then ./mmpl-out/<experiment>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated worker counts, e.g. 1,2,4.
    #[arg(long, value_delimiter = ',')]
    workers: Option<Vec<usize>>,
    /// Chaining mode: minmem or maxthr.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    segments: Option<usize>,
}

impl CommonArgs {
    fn load(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply(&Overrides {
            seed: self.seed,
            out: self.out.clone(),
            workers: self.workers.clone(),
            mode: self.mode.clone(),
            segments: self.segments,
        });
        Ok(cfg)
    }
}

fn out_dir(cfg: &ExperimentConfig, kind: ExperimentKind) -> PathBuf {
    cfg.out
        .clone()
        .or_else(|| std::env::var_os("MMPL_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("mmpl-out").join(kind.name()))
}

fn run(kind: ExperimentKind, args: &CommonArgs) -> Result<(), RunError> {
    let cfg = args.load()?;
    if let Some(declared) = cfg.experiment.filter(|d| *d != kind) {
        return Err(ConfigError::Invalid(format!(
            "configuration declares experiment `{declared}` but `{kind}` was requested"
        ))
        .into());
    }
    let out = out_dir(&cfg, kind);
    let outcome = run_experiment(kind, &cfg, &out)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    println!("wrote {} files to {}", outcome.files.len(), outcome.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Drift(a) => run(ExperimentKind::Drift, a),
        Command::Schedule(a) => run(ExperimentKind::Schedule, a),
        Command::Generate(a) => run(ExperimentKind::Generate, a),
        Command::Compare(a) => run(ExperimentKind::Compare, a),
        Command::ValidateConfig(a) => a
            .load()
            .and_then(|cfg| cfg.validate().map(|_| cfg))
            .map(|cfg| print!("{}", cfg.to_toml()))
            .map_err(RunError::from),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
