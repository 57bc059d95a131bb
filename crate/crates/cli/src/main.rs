//! `qdc`: dataset generation, single-stage runs, full deep-clustering
//! pipelines, and cost-model sweeps, configured by a JSON file.
//!
//! Exit codes: 0 success, 1 numerical failure (singular system, fully
//! filtered spectrum, non-finite gradients), 2 configuration or usage
//! error. Errors print one machine-parsable line on stderr.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use qdc_core::statevector::ExecMode;
use qdc_core::Error;

mod commands;
mod config;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "qdc", version, about = "Quantum deep clustering simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the execution mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ExecMode>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the shot budget of sampled mode.
    #[arg(long)]
    shots: Option<u64>,
}

fn parse_mode(s: &str) -> Result<ExecMode, String> {
    match s {
        "exact" => Ok(ExecMode::Exact),
        "sampled" => Ok(ExecMode::Sampled),
        other => Err(format!("mode must be 'exact' or 'sampled', got {other:?}")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic Gaussian-blob dataset as CSV.
    Generate {
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        blobs: usize,
        #[arg(long)]
        per_blob: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        std: f64,
        /// Minimum center separation in units of std.
        #[arg(long, default_value_t = 6.0)]
        separation: f64,
        #[arg(long)]
        seed: u64,
    },
    /// Train a quantum multiclass SVM and report fidelity against the
    /// classical solver.
    TrainSvm(ConfigArgs),
    /// Run quantum k-means on a dataset and compare with Lloyd iteration.
    Cluster(ConfigArgs),
    /// Run the full deep clustering pipeline.
    DeepCluster(ConfigArgs),
    /// Evaluate the runtime cost model over a parameter-sweep CSV.
    Cost(ConfigArgs),
}

fn resolve(args: &ConfigArgs) -> Result<RunConfig, Error> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(mode) = args.mode {
        config.mode = Some(mode);
    }
    if let Some(out) = &args.out {
        config.out = Some(out.clone());
    }
    if let Some(shots) = args.shots {
        config.shots = Some(shots);
    }
    Ok(config)
}

fn missing_section(name: &str) -> Error {
    Error::Config(format!("config has no \"{name}\" section"))
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate { out, blobs, per_blob, dim, std, separation, seed } => {
            commands::cmd_generate(&commands::GenerateArgs {
                out,
                blobs,
                per_blob,
                dim,
                std,
                separation,
                seed,
            })
        }
        Command::TrainSvm(args) => {
            let config = resolve(&args)?;
            let section = config.svm.clone().ok_or_else(|| missing_section("svm"))?;
            commands::cmd_train_svm(&config, &section)
        }
        Command::Cluster(args) => {
            let config = resolve(&args)?;
            let section = config.cluster.clone().ok_or_else(|| missing_section("cluster"))?;
            commands::cmd_cluster(&config, &section)
        }
        Command::DeepCluster(args) => {
            let config = resolve(&args)?;
            let section = config.pipeline.clone().ok_or_else(|| missing_section("pipeline"))?;
            commands::cmd_deep_cluster(&config, &section)
        }
        Command::Cost(args) => {
            let config = resolve(&args)?;
            let section = config.cost.clone().ok_or_else(|| missing_section("cost"))?;
            commands::cmd_cost(&config, &section)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: code={} message={:?}", error.code(), error.to_string());
            if error.is_numerical() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
