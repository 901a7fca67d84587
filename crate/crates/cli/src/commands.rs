// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use rydgate_core::ansatz::{read_weights, write_weights, ChainedNetwork};
use rydgate_core::evaluation::{
    evaluate_family, fit_times, reference_time_fit, DecompositionPreset, EvalMeans, EvalRecord, FitModel, FitResult,
    REFERENCE_CZ_TIME,
};
use rydgate_core::model::{AtomSystem, Blockade};
use rydgate_core::objective::{Decomposer, FidelityReport};
use rydgate_core::propagator::default_steps;
use rydgate_core::trainer::{train, IntervalRun, RunStatus, TrainConfig};

use crate::config::{Gate, RunConfig};
use crate::pulse::{PulseFile, PulseHeader};
use crate::{Cli, Command, EvalArgs, ExportArgs, FitArgs, GlobalArgs, RatioArgs, TrainArgs};
use crate::{EXIT_FIT_FAILED, EXIT_ITERATION_CAPPED};

const DEFAULT_OUT_DIR: &str = "rydgate-out";
const WEIGHTS_DIR: &str = "weights";

/// Invocation error that maps to the usage exit status.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<rydgate_core::Error>() {
        Some(rydgate_core::Error::FitFailed(_) | rydgate_core::Error::Singular(_)) => EXIT_FIT_FAILED,
        _ => 1,
    }
}

pub fn run(cli: Cli) -> anyhow::Result<u8> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the worker pool")?;
    }
    let config = load_config(&cli.global)?;
    let out_dir = cli
        .global
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let ctx = RunContext { config, out_dir, seed: cli.global.seed };
    match cli.command {
        Command::Train(args) => cmd_train(&ctx, args),
        Command::Eval(args) => cmd_eval(&ctx, args),
        Command::ExportPulse(args) => cmd_export_pulse(&ctx, args),
        Command::Fit(args) => cmd_fit(&ctx, args),
        Command::Ratio(args) => cmd_ratio(&ctx, args),
    }
}

struct RunContext {
    config: RunConfig,
    out_dir: PathBuf,
    seed: Option<u64>,
}

impl RunContext {
    fn seed(&self) -> u64 {
        self.seed.or(self.config.seed).unwrap_or(0)
    }

    fn out(&self, name: &str) -> anyhow::Result<PathBuf> {
        fs::create_dir_all(&self.out_dir).with_context(|| format!("creating {}", self.out_dir.display()))?;
        Ok(self.out_dir.join(name))
    }
}

fn load_config(global: &GlobalArgs) -> anyhow::Result<RunConfig> {
    match &global.config {
        Some(path) if !path.is_file() => Err(usage(format!("config file {} not found", path.display()))),
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    }
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Networks read from every `.bin` file in `dir`, in file-name order.
pub fn load_family(dir: &Path) -> anyhow::Result<Vec<ChainedNetwork>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading weights directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "bin"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no weights files in {}", dir.display());
    }
    paths.iter().map(|p| read_weights(p).with_context(|| format!("loading {}", p.display()))).collect()
}

#[derive(Serialize)]
struct IntervalSummary<'a> {
    tag: &'a str,
    lo: f64,
    hi: f64,
    status: RunStatus,
    iterations: usize,
    final_j: Option<f64>,
    final_j_opt: Option<f64>,
    final_mean_t: Option<f64>,
    wall_time: f64,
}

impl<'a> From<&'a IntervalRun> for IntervalSummary<'a> {
    fn from(r: &'a IntervalRun) -> Self {
        let last = r.trace.last();
        Self {
            tag: &r.tag,
            lo: r.interval.lo,
            hi: r.interval.hi,
            status: r.status,
            iterations: r.iterations,
            final_j: last.map(|x| x.j),
            final_j_opt: last.map(|x| x.j_opt),
            final_mean_t: last.map(|x| x.mean_t),
            wall_time: r.wall_time,
        }
    }
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    gate: Gate,
    seed: u64,
    converged: bool,
    wall_time: f64,
    stages: &'a [String],
    weights: Vec<String>,
    intervals: Vec<IntervalSummary<'a>>,
    train_config: &'a TrainConfig,
}

fn cmd_train(ctx: &RunContext, args: TrainArgs) -> anyhow::Result<u8> {
    let gate = args.gate.or(ctx.config.gate).ok_or_else(|| usage("no gate given; pass --gate or set it in the config"))?;
    let mut cfg = ctx.config.train_config(gate)?;
    cfg.seed = ctx.seed.unwrap_or(cfg.seed);
    if let Some(stage) = args.stage {
        cfg.blockade_stage = stage;
    }
    if let Some(n) = args.max_iters {
        cfg.max_iters = n;
    }
    cfg.checkpoint_dir = Some(ctx.out("checkpoints")?);
    cfg.progress_log = Some(ctx.out("progress.jsonl")?);
    cfg.validate()?;
    let sys = ctx.config.system(gate)?;
    let net_cfg = ctx.config.net_config(gate)?;
    log::info!("training {gate} on {} intervals, seed {}", cfg.intervals, cfg.seed);

    let run = train(gate.k(), &cfg, &sys, net_cfg)?;
    let weights_dir = ctx.out(WEIGHTS_DIR)?;
    fs::create_dir_all(&weights_dir)?;
    let mut weights = Vec::new();
    for (i, net) in run.nets.iter().enumerate() {
        let name = format!("interval_{i:02}.bin");
        write_weights(&weights_dir.join(&name), net)?;
        weights.push(format!("{WEIGHTS_DIR}/{name}"));
    }
    let converged = run.all_converged();
    let summary = TrainSummary {
        gate,
        seed: cfg.seed,
        converged,
        wall_time: run.wall_time,
        stages: &run.stage_log,
        weights,
        intervals: run.runs.iter().map(IntervalSummary::from).collect(),
        train_config: &cfg,
    };
    write_file(&ctx.out("train_summary.json")?, &to_json(&summary)?)?;
    if converged {
        log::info!("all intervals converged in {:.0} s", run.wall_time);
        Ok(0)
    } else {
        log::warn!("iteration cap reached before convergence");
        Ok(EXIT_ITERATION_CAPPED)
    }
}

fn eval_system(ctx: &RunContext, gate: Gate, args: &EvalArgs) -> anyhow::Result<AtomSystem> {
    let mut sys = ctx.config.system(gate)?;
    if let Some(g) = args.gamma {
        if !(g >= 0.0 && g.is_finite()) {
            return Err(usage("--gamma must be finite and nonnegative"));
        }
        sys = sys.with_gamma(g);
    }
    if let Some(b) = args.blockade {
        if !(b > 0.0 && b.is_finite()) {
            return Err(usage("--blockade must be positive"));
        }
        sys = sys.with_blockade(Blockade::Finite(b));
    }
    Ok(sys)
}

#[derive(Serialize, Deserialize)]
struct EvalSummary {
    gate: Gate,
    seed: u64,
    n_samples: usize,
    blockade: Option<f64>,
    gamma: f64,
    means: EvalMeans,
}

#[derive(Serialize, Deserialize)]
struct PulseEval {
    header: PulseHeader,
    blockade: Option<f64>,
    gamma: f64,
    n_steps: usize,
    report: FidelityReport,
}

fn blockade_value(sys: &AtomSystem) -> Option<f64> {
    match sys.blockade {
        Blockade::Finite(b) => Some(b),
        Blockade::Infinite => None,
    }
}

fn cmd_eval(ctx: &RunContext, args: EvalArgs) -> anyhow::Result<u8> {
    let steps = args.steps.or(ctx.config.eval.n_steps);
    if let Some(path) = &args.pulse {
        let file = PulseFile::read(path)?;
        let gate = file.header.gate;
        let sys = eval_system(ctx, gate, &args)?;
        let n_steps = steps.unwrap_or(file.header.n_steps);
        let report = Decomposer::new(gate.k(), &sys)?.report(&file.to_pulse()?, n_steps)?;
        let out = PulseEval { header: file.header, blockade: blockade_value(&sys), gamma: sys.gamma, n_steps, report };
        let json = to_json(&out)?;
        write_file(&ctx.out("pulse_eval.json")?, &json)?;
        print!("{json}");
        return Ok(0);
    }
    let dir = args.weights.as_deref().expect("clap requires weights without a pulse");
    let nets = load_family(dir)?;
    let gate = Gate::from_k(nets[0].config().gate_k)?;
    let sys = eval_system(ctx, gate, &args)?;
    let samples = args.samples.unwrap_or(ctx.config.eval.samples);
    if samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    let report = evaluate_family(&nets, &sys, samples, ctx.seed(), steps)?;
    write_file(&ctx.out("records.jsonl")?, &report.records_jsonl()?)?;
    write_file(&ctx.out("plot.csv")?, &report.to_csv())?;
    let summary = EvalSummary {
        gate,
        seed: report.seed,
        n_samples: report.n_samples,
        blockade: blockade_value(&sys),
        gamma: sys.gamma,
        means: report.means.clone(),
    };
    let json = to_json(&summary)?;
    write_file(&ctx.out("summary.json")?, &json)?;
    print!("{json}");
    Ok(0)
}

fn cmd_export_pulse(ctx: &RunContext, args: ExportArgs) -> anyhow::Result<u8> {
    if !(args.phi > 0.0 && args.phi <= std::f64::consts::PI) {
        return Err(usage(format!("φ = {} is outside (0, π]", args.phi)));
    }
    if args.resolution == 0 {
        return Err(usage("--resolution must be at least 1"));
    }
    let nets = load_family(&args.weights)?;
    let net = nets
        .iter()
        .find(|n| n.interval().contains(args.phi))
        .ok_or_else(|| anyhow::anyhow!("no network covers φ = {}", args.phi))?;
    let gate = Gate::from_k(net.config().gate_k)?;
    let pulse = net.forward(args.phi)?;
    let n_steps = ctx.config.eval.n_steps.unwrap_or_else(|| default_steps(net.config().t_bound));
    let file = PulseFile::from_pulse(gate, &pulse, args.resolution, n_steps, ctx.config.units())?;
    let path = match args.output {
        Some(p) => p,
        None => ctx.out("pulse.json")?,
    };
    write_file(&path, &file.to_json()?)?;
    log::info!("wrote {} ({} samples, T = {:.4} = {:.5} μs)", path.display(), file.time.len(), pulse.duration, file.header.duration_us);
    Ok(0)
}

#[derive(Serialize, Deserialize)]
struct FitOutput {
    #[serde(flatten)]
    fit: FitResult,
    n_points: usize,
    /// Mean of the fitted curve over `(0, π]`.
    domain_mean: f64,
}

fn read_records(path: &Path) -> anyhow::Result<Vec<EvalRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

fn cmd_fit(ctx: &RunContext, args: FitArgs) -> anyhow::Result<u8> {
    if !args.report.is_file() {
        return Err(usage(format!("report {} not found", args.report.display())));
    }
    let records = read_records(&args.report)?;
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| args.interval.map_or(true, |i| r.interval == i))
        .map(|r| (r.phi, r.duration))
        .collect();
    let fit = fit_times(&points, args.model)?;
    let out = FitOutput { domain_mean: fit.domain_mean(), n_points: points.len(), fit };
    let json = to_json(&out)?;
    let path = match args.output {
        Some(p) => p,
        None => ctx.out("fit.json")?,
    };
    write_file(&path, &json)?;
    println!("{:?} fit of {} points: params {:?}, r² = {:.6}", args.model, out.n_points, out.fit.params, out.fit.r_squared);
    Ok(0)
}

#[derive(Serialize)]
struct RatioOutput {
    gate: Gate,
    cz_count: usize,
    cz_time: f64,
    t_decomposed: f64,
    t_native: f64,
    native_source: String,
    ratio: f64,
}

fn cmd_ratio(_ctx: &RunContext, args: RatioArgs) -> anyhow::Result<u8> {
    let preset = DecompositionPreset::for_gate(args.gate.k())?;
    let cz_time = args.cz_time.unwrap_or(REFERENCE_CZ_TIME);
    let (t_native, native_source) = if let Some(t) = args.native_time {
        (t, "command line".to_string())
    } else if let Some(path) = &args.fit {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let fit: FitOutput = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        (fit.domain_mean, path.display().to_string())
    } else {
        let (model, params) = reference_time_fit(args.gate.k())?;
        let source = match model {
            FitModel::Arcsinh => format!("reference fit a·arcsinh(bφ), (a, b) = {params:?}"),
            FitModel::Poly2 => format!("reference fit aφ² + bφ + c, (a, b, c) = {params:?}"),
        };
        (model.domain_mean(&params), source)
    };
    let t_decomposed = preset.decomposed_time(cz_time)?;
    let ratio = preset.ratio(cz_time, t_native)?;
    let out = RatioOutput { gate: args.gate, cz_count: preset.cz_count, cz_time, t_decomposed, t_native, native_source, ratio };
    print!("{}", to_json(&out)?);
    Ok(0)
}
