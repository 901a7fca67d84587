// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

//! Adam training of the chained networks on `J_opt = ⟨1 − F⟩_φ + μ⟨T_φ⟩_φ`
//! over fresh uniform angle batches, interval by interval.

mod adam;
mod fixed;

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{read_weights, write_weights, ChainCache, ChainedNetwork, Interval, NetConfig, PulseGradient};
use crate::error::{Error, Result};
use crate::model::{AtomSystem, Blockade, ControlModel};
use crate::objective::{gate_fidelity, propagate_pulse, pulse_infidelity_grad, GateTarget, DEFAULT_MU};
use crate::propagator::{default_steps, Propagator};

pub use adam::{AdamHyper, AdamState};
pub use fixed::{fixed_angle_optimize, initial_pulse, FixedAngleConfig, FixedAngleResult};

/// Realistic blockade strength `V/Ω_max`.
pub const DEFAULT_EVAL_B: f64 = 21.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockadeStage {
    /// Train with `B → ∞` first, then re-train at the evaluation blockade.
    InfiniteFirst,
    FiniteOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_m: usize,
    pub learning_rate: f64,
    /// Time penalty applied once the batch infidelity drops below
    /// `mu_enable_below`.
    pub mu: f64,
    pub mu_enable_below: f64,
    pub max_iters: usize,
    /// Iterations per moving-average window of the plateau test.
    pub plateau_window: usize,
    /// Relative improvement between consecutive windows that counts as a
    /// plateau.
    pub plateau_threshold: f64,
    /// Plateaus answered by halving the learning rate before stopping.
    pub max_lr_halvings: usize,
    /// Stop as soon as `J_opt` falls below this value; `0` disables.
    pub target_j_opt: f64,
    pub seed: u64,
    /// Iterations of the single-angle optimizer whose pulse anchors the
    /// fresh network at the top of the first interval; `0` disables.
    pub oracle_iters: usize,
    pub intervals: usize,
    pub blockade_stage: BlockadeStage,
    pub eval_b: f64,
    /// Propagation steps; defaults to the grid for the duration bound.
    pub n_steps: Option<usize>,
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
    pub progress_log: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_m: 80,
            learning_rate: 3e-4,
            mu: DEFAULT_MU,
            mu_enable_below: 1e-3,
            max_iters: 20_000,
            plateau_window: 50,
            plateau_threshold: 1e-4,
            max_lr_halvings: 4,
            target_j_opt: 0.0,
            seed: 0,
            oracle_iters: 3000,
            intervals: 5,
            blockade_stage: BlockadeStage::FiniteOnly,
            eval_b: DEFAULT_EVAL_B,
            n_steps: None,
            checkpoint_every: 100,
            checkpoint_dir: None,
            progress_log: None,
        }
    }
}

impl TrainConfig {
    pub fn for_gate(k: usize) -> Result<Self> {
        match k {
            1 => Ok(Self::default()),
            2 => Ok(Self { intervals: 14, blockade_stage: BlockadeStage::InfiniteFirst, ..Self::default() }),
            _ => Err(Error::Unsupported(format!("gates with {k} controls"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.batch_m == 0 {
            return bad("batch_m must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and nonnegative");
        }
        if !(self.mu >= 0.0) {
            return bad("mu must be nonnegative");
        }
        if self.intervals == 0 {
            return bad("intervals must be at least 1");
        }
        if self.plateau_window == 0 {
            return bad("plateau_window must be at least 1");
        }
        if !(self.eval_b > 0.0) {
            return bad("eval_b must be positive");
        }
        if let Some(n) = self.n_steps {
            if n < crate::propagator::MIN_STEPS {
                return bad("n_steps below the minimum grid");
            }
        }
        Ok(())
    }

    fn steps_for(&self, t_bound: f64) -> usize {
        self.n_steps.unwrap_or_else(|| default_steps(t_bound))
    }
}

/// `m` i.i.d. uniform draws from `(lo, hi]`.
pub fn sample_angles(interval: &Interval, m: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if !(interval.width() > 0.0) {
        return Err(Error::InvalidArgument(format!("empty interval ({}, {}]", interval.lo, interval.hi)));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("zero samples".into()));
    }
    // `1 − u` with `u ∈ [0, 1)` lies in `(0, 1]`.
    Ok((0..m).map(|_| interval.lo + interval.width() * (1.0 - rng.gen::<f64>())).collect())
}

/// Generator for the angle batch of one iteration, independent of how many
/// iterations ran before in this process.
pub fn iteration_rng(seed: u64, stream: u64, iteration: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos((iteration as u128) << 32);
    rng
}

/// Batch cost and, optionally, its gradient over the network parameters.
#[derive(Clone, Debug)]
pub struct BatchEval {
    pub j: f64,
    pub j_opt: f64,
    pub mean_duration: f64,
    pub grad: Option<Vec<f64>>,
}

pub fn batch_objective(
    net: &ChainedNetwork,
    angles: &[f64],
    propagator: &Propagator,
    n_steps: usize,
    mu: f64,
    with_grad: bool,
) -> Result<BatchEval> {
    if angles.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let k = net.config().gate_k;
    let m = angles.len() as f64;
    type Item = (f64, f64, Option<(PulseGradient, ChainCache)>);
    let items: Vec<Item> = angles
        .par_iter()
        .map(|&phi| -> Result<Item> {
            let target = GateTarget::new(k, phi)?;
            if with_grad {
                let (spec, cache) = net.forward_cached(phi)?;
                let (infid, pg) = pulse_infidelity_grad(propagator, &spec, &target, n_steps)?;
                Ok((spec.duration, infid, Some((pg, cache))))
            } else {
                let spec = net.forward(phi)?;
                let u = propagate_pulse(propagator, &spec, n_steps)?.final_unitary;
                Ok((spec.duration, 1.0 - gate_fidelity(&u, &target, spec.theta_c)?, None))
            }
        })
        .collect::<Result<_>>()?;

    let j = items.iter().map(|it| it.1).sum::<f64>() / m;
    let mean_duration = items.iter().map(|it| it.0).sum::<f64>() / m;
    let grad = with_grad.then(|| {
        let mut grad = vec![0.0; net.n_params()];
        for (_, _, extra) in &items {
            let (pg, cache) = extra.as_ref().expect("recorded with gradient");
            let scaled = PulseGradient {
                duration: (pg.duration + mu) / m,
                knots: pg.knots.iter().map(|g| g / m).collect(),
                theta_c: pg.theta_c / m,
            };
            net.backward(cache, &scaled, &mut grad);
        }
        grad
    });
    Ok(BatchEval { j, j_opt: j + mu * mean_duration, mean_duration, grad })
}

/// One line of the progress log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "J_opt")]
    pub j_opt: f64,
    pub mean_t: f64,
    pub wall_time: f64,
    pub lr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxIters,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalRun {
    pub tag: String,
    pub interval: Interval,
    pub status: RunStatus,
    pub iterations: usize,
    pub trace: Vec<IterRecord>,
    pub wall_time: f64,
}

impl IntervalRun {
    pub fn final_j(&self) -> Option<f64> {
        self.trace.last().map(|r| r.j)
    }
}

/// Plateau test and learning-rate schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Schedule {
    lr: f64,
    halvings: usize,
    mu_active: bool,
    /// Index into the trace where the current comparison run started.
    window_start: usize,
}

impl Schedule {
    /// Returns `true` once the run has converged.
    fn update(&mut self, trace: &[IterRecord], cfg: &TrainConfig) -> bool {
        if cfg.target_j_opt > 0.0 && trace.last().is_some_and(|r| r.j_opt <= cfg.target_j_opt) {
            return true;
        }
        let w = cfg.plateau_window;
        let seen = trace.len() - self.window_start;
        if seen < 2 * w || seen % w != 0 {
            return false;
        }
        let mean = |s: &[IterRecord]| s.iter().map(|r| r.j_opt).sum::<f64>() / s.len() as f64;
        let n = trace.len();
        let prev = mean(&trace[n - 2 * w..n - w]);
        let cur = mean(&trace[n - w..]);
        if (prev - cur) / prev.abs().max(f64::MIN_POSITIVE) >= cfg.plateau_threshold {
            return false;
        }
        if self.halvings >= cfg.max_lr_halvings {
            return true;
        }
        self.halvings += 1;
        self.lr *= 0.5;
        self.window_start = n;
        false
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointState {
    iteration: usize,
    schedule: Schedule,
    status: Option<RunStatus>,
    trace: Vec<IterRecord>,
    wall_time: f64,
}

fn checkpoint_paths(dir: &Path, tag: &str) -> (PathBuf, PathBuf, PathBuf) {
    (dir.join(format!("{tag}.bin")), dir.join(format!("{tag}.adam")), dir.join(format!("{tag}.state.json")))
}

fn save_checkpoint(dir: &Path, tag: &str, net: &ChainedNetwork, adam: &AdamState, state: &CheckpointState) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (w, a, s) = checkpoint_paths(dir, tag);
    write_weights(&w, net)?;
    crate::ansatz::write_atomic_bytes(&a, &adam.to_bytes())?;
    crate::ansatz::write_atomic_bytes(&s, &serde_json::to_vec(state)?)
}

fn load_checkpoint(dir: &Path, tag: &str) -> Result<Option<(ChainedNetwork, AdamState, CheckpointState)>> {
    let (w, a, s) = checkpoint_paths(dir, tag);
    if !s.exists() {
        return Ok(None);
    }
    let state: CheckpointState = serde_json::from_slice(&fs::read(&s)?)?;
    Ok(Some((read_weights(&w)?, AdamState::from_bytes(&fs::read(&a)?)?, state)))
}

fn open_progress(cfg: &TrainConfig) -> Result<Option<BufWriter<File>>> {
    match &cfg.progress_log {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            Ok(Some(BufWriter::new(OpenOptions::new().create(true).append(true).open(p)?)))
        }
        None => Ok(None),
    }
}

#[derive(Serialize)]
struct ProgressLine<'a> {
    tag: &'a str,
    #[serde(flatten)]
    record: &'a IterRecord,
}

/// Trains `net` on angles from `interval` under `sys`. `stream` separates the
/// angle sequences of different intervals and stages, and `tag` names the
/// checkpoint files. On divergence the network is restored to its last
/// finite-loss parameters before the error is returned.
pub fn train_interval(
    net: &mut ChainedNetwork,
    interval: Interval,
    cfg: &TrainConfig,
    sys: &AtomSystem,
    tag: &str,
    stream: u64,
) -> Result<IntervalRun> {
    cfg.validate()?;
    let k = net.config().gate_k;
    if sys.n_atoms != k + 1 {
        return Err(Error::DimensionMismatch(format!("{} atoms for a gate with {k} controls", sys.n_atoms)));
    }
    let propagator = Propagator::new(&ControlModel::for_system(sys)?);
    let n_steps = cfg.steps_for(net.config().t_bound);
    net.set_interval(interval);

    let mut adam = AdamState::new(net.n_params());
    let mut schedule = Schedule { lr: cfg.learning_rate, halvings: 0, mu_active: cfg.mu == 0.0, window_start: 0 };
    let mut trace: Vec<IterRecord> = Vec::new();
    let mut start_iter = 0;
    let mut prior_wall = 0.0;
    if let Some(dir) = &cfg.checkpoint_dir {
        if let Some((saved, saved_adam, state)) = load_checkpoint(dir, tag)? {
            if saved.n_params() != net.n_params() {
                return Err(Error::Format(format!("checkpoint {tag} does not match the network")));
            }
            *net = saved;
            log::info!("{tag}: resuming at iteration {}", state.iteration);
            if let Some(status) = state.status {
                return Ok(IntervalRun {
                    tag: tag.into(),
                    interval,
                    status,
                    iterations: state.iteration,
                    trace: state.trace,
                    wall_time: state.wall_time,
                });
            }
            adam = saved_adam;
            schedule = state.schedule;
            trace = state.trace;
            start_iter = state.iteration;
            prior_wall = state.wall_time;
        }
    }

    let mut progress = open_progress(cfg)?;
    let clock = Instant::now();
    let wall = |c: &Instant| prior_wall + c.elapsed().as_secs_f64();
    let mut status = RunStatus::MaxIters;
    let mut iteration = start_iter;
    while iteration < cfg.max_iters {
        let mut rng = iteration_rng(cfg.seed, stream, iteration);
        let angles = sample_angles(&interval, cfg.batch_m, &mut rng)?;
        let mu = if schedule.mu_active { cfg.mu } else { 0.0 };
        let eval = match batch_objective(net, &angles, &propagator, n_steps, mu, true) {
            Ok(e) if e.j_opt.is_finite() && e.grad.as_ref().is_some_and(|g| g.iter().all(|v| v.is_finite())) => e,
            Ok(_) | Err(Error::NonFinite(_)) => {
                log::error!("{tag}: loss diverged at iteration {iteration}");
                if let Some(dir) = &cfg.checkpoint_dir {
                    let state = CheckpointState {
                        iteration,
                        schedule: schedule.clone(),
                        status: None,
                        trace: trace.clone(),
                        wall_time: wall(&clock),
                    };
                    save_checkpoint(dir, tag, net, &adam, &state)?;
                }
                return Err(Error::Diverged { iteration });
            }
            Err(e) => return Err(e),
        };
        let record = IterRecord {
            iter: iteration,
            j: eval.j,
            j_opt: eval.j_opt,
            mean_t: eval.mean_duration,
            wall_time: wall(&clock),
            lr: schedule.lr,
        };
        if let Some(out) = progress.as_mut() {
            serde_json::to_writer(&mut *out, &ProgressLine { tag, record: &record })?;
            out.write_all(b"\n")?;
        }
        if iteration % 100 == 0 {
            log::info!("{tag} iter {iteration}: J={:.3e} J_opt={:.3e} T={:.3}", eval.j, eval.j_opt, eval.mean_duration);
        }
        trace.push(record);

        let step = adam.step(eval.grad.as_ref().expect("gradient requested"), schedule.lr);
        net.add_to_params(&step);
        iteration += 1;

        if !schedule.mu_active && eval.j < cfg.mu_enable_below {
            schedule.mu_active = true;
            schedule.window_start = trace.len();
        }
        let done = schedule.update(&trace, cfg);
        if let Some(dir) = &cfg.checkpoint_dir {
            if done || (cfg.checkpoint_every > 0 && iteration % cfg.checkpoint_every == 0) {
                let state = CheckpointState {
                    iteration,
                    schedule: schedule.clone(),
                    status: done.then_some(RunStatus::Converged),
                    trace: trace.clone(),
                    wall_time: wall(&clock),
                };
                save_checkpoint(dir, tag, net, &adam, &state)?;
                if let Some(out) = progress.as_mut() {
                    out.flush()?;
                }
            }
        }
        if done {
            status = RunStatus::Converged;
            break;
        }
    }
    if let Some(out) = progress.as_mut() {
        out.flush()?;
    }
    let run = IntervalRun { tag: tag.into(), interval, status, iterations: iteration, trace, wall_time: wall(&clock) };
    if let (Some(dir), RunStatus::MaxIters) = (&cfg.checkpoint_dir, status) {
        let state = CheckpointState {
            iteration,
            schedule,
            status: Some(status),
            trace: run.trace.clone(),
            wall_time: run.wall_time,
        };
        save_checkpoint(dir, tag, net, &adam, &state)?;
    }
    Ok(run)
}

/// Networks and logs of a family training run, in interval order.
#[derive(Clone, Debug)]
pub struct TrainRun {
    pub k: usize,
    pub seed: u64,
    pub nets: Vec<ChainedNetwork>,
    pub runs: Vec<IntervalRun>,
    pub stage_log: Vec<String>,
    pub wall_time: f64,
}

impl TrainRun {
    pub fn all_converged(&self) -> bool {
        self.runs.iter().all(|r| r.status == RunStatus::Converged)
    }
}

/// Correction-angle offset that best serves a fresh network at `phi`.
fn calibrate_theta_center(net: &mut ChainedNetwork, phi: f64, sys: &AtomSystem, n_steps: usize) -> Result<()> {
    let propagator = Propagator::new(&ControlModel::for_system(sys)?);
    let mut spec = net.forward(phi)?;
    spec.theta_c = 0.0;
    let u = propagate_pulse(&propagator, &spec, n_steps)?.final_unitary;
    let (theta, _) = crate::objective::best_theta(&u, &GateTarget::new(net.config().gate_k, phi)?, 4096)?;
    let head_offset = net.forward(phi)?.theta_c - net.theta_center();
    net.set_theta_center(theta - head_offset);
    Ok(())
}

fn train_stage(
    nets: &mut [Option<ChainedNetwork>],
    intervals: &[Interval],
    cfg: &TrainConfig,
    sys: &AtomSystem,
    stage: &str,
    stage_index: u64,
    runs: &mut Vec<IntervalRun>,
) -> Result<()> {
    let n = intervals.len() as u64;
    let mut previous: Option<ChainedNetwork> = None;
    // The interval holding φ = π is trained first; each other interval
    // starts from its converged upper neighbour.
    for i in (0..intervals.len()).rev() {
        let mut net = match (nets[i].take(), previous.take()) {
            (Some(own), _) => own,
            (None, Some(prev)) => prev,
            (None, None) => return Err(Error::InvalidArgument("no network to start from".into())),
        };
        let tag = format!("{stage}_interval_{i:02}");
        let run = train_interval(&mut net, intervals[i], cfg, sys, &tag, stage_index * n + i as u64)?;
        log::info!("{tag}: {:?} after {} iterations, J={:.3e}", run.status, run.iterations, run.final_j().unwrap_or(f64::NAN));
        runs.push(run);
        previous = Some(net.clone());
        nets[i] = Some(net);
    }
    Ok(())
}

/// Trains one network per interval of a uniform partition of `(0, π]`.
pub fn train_family(k: usize, cfg: &TrainConfig, sys: &AtomSystem, net_cfg: NetConfig) -> Result<TrainRun> {
    train_family_staged(k, cfg, sys, net_cfg, "family", 0)
}

/// Fresh network for `top`, seeded from `cfg.seed` and anchored to a
/// single-angle optimized pulse at `top.hi`.
pub fn initial_network(
    k: usize,
    cfg: &TrainConfig,
    sys: &AtomSystem,
    net_cfg: NetConfig,
    top: Interval,
) -> Result<ChainedNetwork> {
    if net_cfg.gate_k != k {
        return Err(Error::InvalidArgument(format!("network built for k = {}, training k = {k}", net_cfg.gate_k)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = ChainedNetwork::random(NetConfig { interval: top, ..net_cfg }, &mut rng)?;
    let n_steps = cfg.steps_for(net_cfg.t_bound);
    if cfg.oracle_iters == 0 {
        calibrate_theta_center(&mut net, top.hi, sys, n_steps)?;
        return Ok(net);
    }
    let fixed_cfg = FixedAngleConfig {
        max_iters: cfg.oracle_iters,
        mu: cfg.mu,
        mu_enable_below: cfg.mu_enable_below,
        t_bound: net_cfg.t_bound,
        delta_bound: net_cfg.delta_bound,
        n_steps: Some(n_steps),
        ..FixedAngleConfig::default()
    };
    let duration = crate::ansatz::t_opt(k)?.min(0.9 * net_cfg.t_bound);
    let init = initial_pulse(top.hi, net_cfg.n_knots, duration);
    let oracle = fixed_angle_optimize(k, top.hi, &init, &fixed_cfg, sys)?;
    log::info!("anchor pulse at φ={:.4}: 1−F={:.3e}, T={:.4}", top.hi, oracle.infidelity, oracle.pulse.duration);
    net.anchor(&oracle.pulse)?;
    Ok(net)
}

fn train_family_staged(
    k: usize,
    cfg: &TrainConfig,
    sys: &AtomSystem,
    net_cfg: NetConfig,
    stage: &str,
    stage_index: u64,
) -> Result<TrainRun> {
    cfg.validate()?;
    let clock = Instant::now();
    let intervals = Interval::partition(cfg.intervals)?;
    let top = *intervals.last().expect("nonempty partition");
    let mut nets: Vec<Option<ChainedNetwork>> = vec![None; intervals.len()];
    *nets.last_mut().expect("nonempty") = Some(initial_network(k, cfg, sys, net_cfg, top)?);
    let mut runs = Vec::new();
    train_stage(&mut nets, &intervals, cfg, sys, stage, stage_index, &mut runs)?;
    Ok(TrainRun {
        k,
        seed: cfg.seed,
        nets: nets.into_iter().map(|n| n.expect("trained")).collect(),
        runs,
        stage_log: vec![format!("{stage}: {} intervals at {}", intervals.len(), sys.blockade)],
        wall_time: clock.elapsed().as_secs_f64(),
    })
}

/// Trains under the ideal blockade first, then re-trains the same weights at
/// the finite blockade `cfg.eval_b`.
pub fn two_stage_blockade(k: usize, cfg: &TrainConfig, sys: &AtomSystem, net_cfg: NetConfig) -> Result<TrainRun> {
    if k != 2 {
        return Err(Error::Unsupported("the blockade curriculum is defined for two controls".into()));
    }
    let clock = Instant::now();
    let ideal = sys.with_blockade(Blockade::Infinite);
    let finite = sys.with_blockade(Blockade::Finite(cfg.eval_b));
    let mut run = train_family_staged(k, cfg, &ideal, net_cfg, "stage1", 0)?;
    let intervals = Interval::partition(cfg.intervals)?;
    let mut nets: Vec<Option<ChainedNetwork>> = run.nets.drain(..).map(Some).collect();
    train_stage(&mut nets, &intervals, cfg, &finite, "stage2", 1, &mut run.runs)?;
    run.nets = nets.into_iter().map(|n| n.expect("trained")).collect();
    run.stage_log.push(format!("stage2: {} intervals at {}", intervals.len(), finite.blockade));
    run.wall_time = clock.elapsed().as_secs_f64();
    Ok(run)
}

/// Trains a family with the curriculum chosen by `cfg.blockade_stage`.
pub fn train(k: usize, cfg: &TrainConfig, sys: &AtomSystem, net_cfg: NetConfig) -> Result<TrainRun> {
    match cfg.blockade_stage {
        BlockadeStage::InfiniteFirst => two_stage_blockade(k, cfg, sys, net_cfg),
        BlockadeStage::FiniteOnly => {
            train_family(k, cfg, &sys.with_blockade(Blockade::Finite(cfg.eval_b)), net_cfg)
        }
    }
}
