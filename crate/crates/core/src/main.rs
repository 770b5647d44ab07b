use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kvlab::cli::{self, RunOptions};
use kvlab::config::{ExperimentConfig, Pipeline};

/// Numerical experiments on coupled Kelvin-Voigt damped waves.
///
/// Every flag can also be set through the environment with the `KVLAB_`
/// prefix (`KVLAB_CONFIG`, `KVLAB_OUT`, `KVLAB_WORKERS`, `KVLAB_SEED`).
#[derive(Parser)]
#[command(name = "kvlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long, env = "KVLAB_CONFIG")]
    config: PathBuf,
    /// Output directory; overrides `out` in the config (default `out`).
    #[arg(long, env = "KVLAB_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, env = "KVLAB_WORKERS")]
    workers: Option<usize>,
    /// Seed for random initial data; overrides `seed` in the config.
    #[arg(long, env = "KVLAB_SEED")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate in time and record the energy trace.
    Simulate(RunArgs),
    /// Characteristic roots, asymptotics and generator spectra.
    Spectrum(RunArgs),
    /// Resolvent norm sweep and growth fit.
    Resolvent(RunArgs),
    /// Simulate, then fit an energy decay law.
    DecayFit(RunArgs),
    /// Consolidate manifests into report.json and report.txt.
    Report {
        manifests: Vec<PathBuf>,
        #[arg(long, env = "KVLAB_OUT", default_value = "report")]
        out: PathBuf,
    },
    /// Parse and validate a config without running it.
    Validate {
        #[arg(long, env = "KVLAB_CONFIG")]
        config: PathBuf,
    },
}

fn run(command: Command) -> kvlab::Result<serde_json::Value> {
    let (pipeline, args) = match command {
        Command::Simulate(a) => (Pipeline::Simulate, a),
        Command::Spectrum(a) => (Pipeline::Spectrum, a),
        Command::Resolvent(a) => (Pipeline::Resolvent, a),
        Command::DecayFit(a) => (Pipeline::DecayFit, a),
        Command::Report { manifests, out } => {
            let rep = cli::report(&manifests, &out)?;
            print!("{}", rep.table());
            return Ok(serde_json::json!({ "report": out.join("report.json"), "fail": rep.fail }));
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            return Ok(serde_json::json!({ "valid": true, "pipeline": cfg.pipeline }));
        }
    };
    let opts = RunOptions {
        out: args.out,
        workers: args.workers,
        seed: args.seed,
    };
    let (path, manifest) = cli::run(pipeline, &args.config, &opts)?;
    Ok(serde_json::json!({ "manifest": path, "config_hash": manifest.config_hash }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", cli::error_json(&e));
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
