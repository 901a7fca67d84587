// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

//! Single-angle pulse optimization with the knots, duration and correction
//! angle as direct parameters. Serves as an oracle for the network ansatz and
//! as a duration calibration.

use serde::{Deserialize, Serialize};

use super::{AdamState, RunStatus};
use crate::ansatz::{wrap_angle, PulseSpec, DELTA_BOUND};
use crate::error::{Error, Result};
use crate::model::{AtomSystem, ControlModel};
use crate::objective::{best_theta, gate_fidelity, propagate_pulse, pulse_infidelity_grad, GateTarget};
use crate::propagator::{default_steps, Propagator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedAngleConfig {
    pub learning_rate: f64,
    pub max_iters: usize,
    pub mu: f64,
    pub mu_enable_below: f64,
    pub t_bound: f64,
    pub delta_bound: f64,
    pub n_steps: Option<usize>,
    pub plateau_window: usize,
    pub plateau_threshold: f64,
    pub max_lr_halvings: usize,
    /// Stop once `1 − F` falls below this value; `0` disables.
    pub target_infidelity: f64,
}

impl Default for FixedAngleConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            max_iters: 5000,
            mu: 0.0,
            mu_enable_below: 1e-3,
            t_bound: 1.2 * 7.612,
            delta_bound: DELTA_BOUND,
            n_steps: None,
            plateau_window: 100,
            plateau_threshold: 1e-4,
            max_lr_halvings: 6,
            target_infidelity: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedAngleResult {
    pub pulse: PulseSpec,
    pub infidelity: f64,
    pub iterations: usize,
    pub status: RunStatus,
    /// `J_opt` per iteration.
    pub trace: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Starting guess: a detuning oscillating at the Rabi frequency, the shape of
/// the known time-optimal phase-gate pulses.
pub fn initial_pulse(phi: f64, n_knots: usize, duration: f64) -> PulseSpec {
    let knots = (0..n_knots)
        .map(|j| {
            let s = j as f64 / (n_knots - 1).max(1) as f64;
            0.8 * (duration * s + 4.0).sin()
        })
        .collect();
    PulseSpec { phi, duration, knots, theta_c: 0.0 }
}

struct Raw {
    knots: Vec<f64>,
    duration: f64,
    theta: f64,
}

impl Raw {
    fn from_pulse(p: &PulseSpec, cfg: &FixedAngleConfig) -> Result<Self> {
        if !(p.duration > 0.0 && p.duration < cfg.t_bound) {
            return Err(Error::InvalidArgument(format!("initial duration {} outside (0, {})", p.duration, cfg.t_bound)));
        }
        if let Some(k) = p.knots.iter().find(|k| !(k.abs() < cfg.delta_bound)) {
            return Err(Error::InvalidArgument(format!("initial knot {k} outside ±{}", cfg.delta_bound)));
        }
        Ok(Self {
            knots: p.knots.iter().map(|&k| logit(0.5 * (k / cfg.delta_bound + 1.0))).collect(),
            duration: logit(p.duration / cfg.t_bound),
            theta: p.theta_c,
        })
    }

    fn pulse(&self, phi: f64, cfg: &FixedAngleConfig) -> PulseSpec {
        PulseSpec {
            phi,
            duration: cfg.t_bound * sigmoid(self.duration),
            knots: self.knots.iter().map(|&u| cfg.delta_bound * (2.0 * sigmoid(u) - 1.0)).collect(),
            theta_c: wrap_angle(self.theta),
        }
    }

    fn flat(&self) -> Vec<f64> {
        let mut v = self.knots.clone();
        v.push(self.duration);
        v.push(self.theta);
        v
    }

    fn apply(&mut self, step: &[f64]) {
        let n = self.knots.len();
        for (k, d) in self.knots.iter_mut().zip(step) {
            *k += d;
        }
        self.duration += step[n];
        self.theta += step[n + 1];
    }
}

/// Optimizes one pulse for `C_kP(φ)` under `sys`, starting from `init`.
pub fn fixed_angle_optimize(
    k: usize,
    phi: f64,
    init: &PulseSpec,
    cfg: &FixedAngleConfig,
    sys: &AtomSystem,
) -> Result<FixedAngleResult> {
    let target = GateTarget::new(k, phi)?;
    if sys.n_atoms != k + 1 {
        return Err(Error::DimensionMismatch(format!("{} atoms for a gate with {k} controls", sys.n_atoms)));
    }
    if init.knots.len() < 2 {
        return Err(Error::InvalidArgument("at least two knots".into()));
    }
    let propagator = Propagator::new(&ControlModel::for_system(sys)?);
    let n_steps = cfg.n_steps.unwrap_or_else(|| default_steps(cfg.t_bound));

    let mut raw = Raw::from_pulse(init, cfg)?;
    // Start from the best correction angle for the initial pulse.
    let u0 = propagate_pulse(&propagator, &raw.pulse(phi, cfg), n_steps)?.final_unitary;
    raw.theta = best_theta(&u0, &target, 4096)?.0;

    let mut adam = AdamState::new(raw.knots.len() + 2);
    let mut lr = cfg.learning_rate;
    let mut halvings = 0;
    let mut mu_active = cfg.mu == 0.0;
    let mut window_start = 0;
    let mut trace = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut status = RunStatus::MaxIters;
    let mut iteration = 0;
    while iteration < cfg.max_iters {
        let pulse = raw.pulse(phi, cfg);
        let (infid, pg) = pulse_infidelity_grad(&propagator, &pulse, &target, n_steps)?;
        if !infid.is_finite() {
            return Err(Error::Diverged { iteration });
        }
        let mu = if mu_active { cfg.mu } else { 0.0 };
        let j_opt = infid + mu * pulse.duration;
        trace.push(j_opt);
        if mu_active && best.as_ref().map_or(true, |(b, _)| j_opt < *b) {
            best = Some((j_opt, raw.flat()));
        }

        // Chain rule through the bounding sigmoids.
        let mut grad: Vec<f64> = pg
            .knots
            .iter()
            .zip(&raw.knots)
            .map(|(g, &u)| {
                let s = sigmoid(u);
                g * 2.0 * cfg.delta_bound * s * (1.0 - s)
            })
            .collect();
        let s = sigmoid(raw.duration);
        grad.push((pg.duration + mu) * cfg.t_bound * s * (1.0 - s));
        grad.push(pg.theta_c);
        let step = adam.step(&grad, lr);
        raw.apply(&step);
        iteration += 1;

        if cfg.target_infidelity > 0.0 && infid < cfg.target_infidelity && mu_active {
            status = RunStatus::Converged;
            break;
        }
        if !mu_active && infid < cfg.mu_enable_below {
            mu_active = true;
            window_start = trace.len();
        }
        let w = cfg.plateau_window;
        let seen = trace.len() - window_start;
        if seen >= 2 * w && seen % w == 0 {
            let n = trace.len();
            let prev: f64 = trace[n - 2 * w..n - w].iter().sum::<f64>() / w as f64;
            let cur: f64 = trace[n - w..].iter().sum::<f64>() / w as f64;
            if (prev - cur) / prev.abs().max(f64::MIN_POSITIVE) < cfg.plateau_threshold {
                if halvings >= cfg.max_lr_halvings {
                    status = RunStatus::Converged;
                    break;
                }
                halvings += 1;
                lr *= 0.5;
                window_start = n;
            }
        }
    }
    // Adam is not monotone; report the best iterate seen under the final
    // objective.
    let final_j = {
        let p = raw.pulse(phi, cfg);
        let u = propagate_pulse(&propagator, &p, n_steps)?.final_unitary;
        let f = gate_fidelity(&u, &target, p.theta_c)?;
        (1.0 - f) + if mu_active { cfg.mu * p.duration } else { 0.0 }
    };
    if let Some((b, flat)) = best {
        if b < final_j {
            let n = raw.knots.len();
            raw.knots.copy_from_slice(&flat[..n]);
            raw.duration = flat[n];
            raw.theta = flat[n + 1];
        }
    }
    let pulse = raw.pulse(phi, cfg);
    let u = propagate_pulse(&propagator, &pulse, n_steps)?.final_unitary;
    let infidelity = 1.0 - gate_fidelity(&u, &target, pulse.theta_c)?;
    Ok(FixedAngleResult { pulse, infidelity, iterations: iteration, status, trace })
}
