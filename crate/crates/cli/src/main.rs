// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

//! `rydgate`: train, evaluate and export neural-network pulse families for
//! parametrized Rydberg phase gates.

mod commands;
mod config;
mod pulse;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Gate;
use rydgate_core::evaluation::FitModel;
use rydgate_core::trainer::BlockadeStage;

/// Exit status of a training run stopped by the iteration cap.
pub const EXIT_ITERATION_CAPPED: u8 = 3;
/// Exit status of a fit that did not converge.
pub const EXIT_FIT_FAILED: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "rydgate", version, about = "Neural-network pulse families for Rydberg phase gates")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for training and evaluation sampling; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-angle simulations.
    #[arg(long, global = true, env = "RYDGATE_THREADS")]
    pub threads: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true, env = "RYDGATE_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a pulse family, one network per angle interval.
    Train(TrainArgs),
    /// Evaluate a trained family, or re-simulate an exported pulse.
    Eval(EvalArgs),
    /// Write the pulse of a trained family at one angle.
    ExportPulse(ExportArgs),
    /// Fit pulse durations from an evaluation record file.
    Fit(FitArgs),
    /// Decomposition-time ratio against a native gate family.
    Ratio(RatioArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub gate: Option<Gate>,
    /// Blockade curriculum.
    #[arg(long, value_parser = parse_stage)]
    pub stage: Option<BlockadeStage>,
    /// Iteration cap per interval.
    #[arg(long)]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory with one weights file per interval.
    #[arg(long, required_unless_present = "pulse", conflicts_with = "pulse")]
    pub weights: Option<PathBuf>,
    /// Exported pulse file to re-simulate instead of a family.
    #[arg(long)]
    pub pulse: Option<PathBuf>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Decay rate `Γ/Ω_max`; overrides the configured lifetime.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Blockade strength `V/Ω_max`; overrides the config.
    #[arg(long)]
    pub blockade: Option<f64>,
    /// Propagation steps per pulse.
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub phi: f64,
    /// Number of time steps; the file holds `resolution + 1` samples.
    #[arg(long, default_value_t = 1000)]
    pub resolution: usize,
    /// Output file; defaults to `pulse.json` in the output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Evaluation records (`records.jsonl`).
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, value_parser = parse_model)]
    pub model: FitModel,
    /// Restrict the fit to records from this interval index.
    #[arg(long)]
    pub interval: Option<usize>,
    /// Output file; defaults to `fit.json` in the output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RatioArgs {
    #[arg(long, value_enum)]
    pub gate: Gate,
    /// Per-gate C₁Z duration in `1/Ω_max`.
    #[arg(long)]
    pub cz_time: Option<f64>,
    /// Mean native duration in `1/Ω_max`.
    #[arg(long, conflicts_with = "fit")]
    pub native_time: Option<f64>,
    /// Fit file whose domain mean is the native duration.
    #[arg(long)]
    pub fit: Option<PathBuf>,
}

fn parse_stage(s: &str) -> Result<BlockadeStage, String> {
    match s {
        "infinite-first" => Ok(BlockadeStage::InfiniteFirst),
        "finite-only" => Ok(BlockadeStage::FiniteOnly),
        _ => Err(format!("unknown stage {s:?}; expected infinite-first or finite-only")),
    }
}

fn parse_model(s: &str) -> Result<FitModel, String> {
    match s {
        "arcsinh" => Ok(FitModel::Arcsinh),
        "poly2" => Ok(FitModel::Poly2),
        _ => Err(format!("unknown model {s:?}; expected arcsinh or poly2")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
