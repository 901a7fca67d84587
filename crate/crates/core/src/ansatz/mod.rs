// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

//! Chained networks mapping a gate angle to a bounded pulse: `N_T` gives the
//! duration from `φ`, and `N_C` gives the detuning knots and the global
//! correction angle from `(φ, T_φ)`.

mod io;
mod mlp;
mod waveform;

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) use io::write_atomic as write_atomic_bytes;
pub use io::{read_weights, write_weights, NetManifest, FORMAT_VERSION, MAGIC};
pub use mlp::{Activation, Layer, Mlp, MlpCache};
pub use waveform::Waveform;

/// Detuning bound in units of `Ω_max`.
pub const DELTA_BOUND: f64 = 2.5;
/// Duration bound as a multiple of the time-optimal `C_kZ` duration.
pub const T_BOUND_FACTOR: f64 = 1.2;
pub const DEFAULT_KNOTS: usize = 48;
/// Gain on the output-layer initialization; keeps the sigmoid mid-range.
pub const OUTPUT_GAIN: f64 = 0.1;

/// Time-optimal `C_kZ` duration in units of `1/Ω_max`.
pub fn t_opt(k: usize) -> Result<f64> {
    match k {
        1 => Ok(7.612),
        // 2.6% below the 16.87 duration of the family's C₂Z pulse.
        2 => Ok(16.87 / 1.026),
        _ => Err(Error::Unsupported(format!("gates with {k} controls"))),
    }
}

/// Half-open angle range `(lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo || lo < 0.0 || hi > PI {
            return Err(Error::InvalidArgument(format!("angle interval ({lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn full() -> Self {
        Self { lo: 0.0, hi: PI }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, phi: f64) -> bool {
        phi > self.lo && phi <= self.hi
    }

    /// Uniform partition of `(0, π]` into `n` intervals.
    pub fn partition(n: usize) -> Result<Vec<Self>> {
        if n == 0 {
            return Err(Error::InvalidArgument("zero intervals".into()));
        }
        Ok((0..n)
            .map(|i| Self {
                lo: if i == 0 { 0.0 } else { PI * i as f64 / n as f64 },
                hi: if i + 1 == n { PI } else { PI * (i + 1) as f64 / n as f64 },
            })
            .collect())
    }
}

/// `(m_L^T, m_N^T, m_L^C, m_N^C)`: layer counts (input and output included)
/// and hidden widths of the two networks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub layers_t: usize,
    pub width_t: usize,
    pub layers_c: usize,
    pub width_c: usize,
}

impl Arch {
    pub const fn new(layers_t: usize, width_t: usize, layers_c: usize, width_c: usize) -> Self {
        Self { layers_t, width_t, layers_c, width_c }
    }

    pub fn default_for(k: usize) -> Result<Self> {
        match k {
            1 => Ok(Self::new(3, 45, 10, 300)),
            2 => Ok(Self::new(4, 45, 20, 300)),
            _ => Err(Error::Unsupported(format!("gates with {k} controls"))),
        }
    }

    pub fn as_tuple(&self) -> (usize, usize, usize, usize) {
        (self.layers_t, self.width_t, self.layers_c, self.width_c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetConfig {
    pub gate_k: usize,
    pub arch: Arch,
    pub interval: Interval,
    pub n_knots: usize,
    pub delta_bound: f64,
    pub t_bound: f64,
    pub correction_head: bool,
}

impl NetConfig {
    pub fn for_gate(k: usize) -> Result<Self> {
        Ok(Self {
            gate_k: k,
            arch: Arch::default_for(k)?,
            interval: Interval::full(),
            n_knots: DEFAULT_KNOTS,
            delta_bound: DELTA_BOUND,
            t_bound: T_BOUND_FACTOR * t_opt(k)?,
            correction_head: true,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.gate_k) {
            return Err(Error::Unsupported(format!("gates with {} controls", self.gate_k)));
        }
        if self.n_knots < 2 {
            return Err(Error::InvalidArgument(format!("{} knots", self.n_knots)));
        }
        if !(self.delta_bound > 0.0 && self.t_bound > 0.0) {
            return Err(Error::InvalidArgument("pulse bounds must be positive".into()));
        }
        if self.arch.layers_t < 2 || self.arch.layers_c < 2 {
            return Err(Error::InvalidArgument("each network needs input and output layers".into()));
        }
        Ok(())
    }
}

/// One pulse: duration, detuning knots uniformly spaced over it, and the
/// global `R_Z` correction angle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub phi: f64,
    pub duration: f64,
    pub knots: Vec<f64>,
    pub theta_c: f64,
}

impl PulseSpec {
    pub fn waveform(&self) -> Result<Waveform> {
        Waveform::new(&self.knots)
    }

    /// Detuning at time `t ∈ [0, T]`.
    pub fn detuning(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.duration).contains(&t) {
            return Err(Error::InvalidArgument(format!("time {t} outside [0, {}]", self.duration)));
        }
        let s = if self.duration > 0.0 { t / self.duration } else { 0.0 };
        Ok(self.waveform()?.value(s))
    }

    /// Detunings at the midpoints of `n_steps` equal steps.
    pub fn step_controls(&self, n_steps: usize) -> Result<Vec<f64>> {
        let w = self.waveform()?;
        Ok((0..n_steps).map(|j| w.value((j as f64 + 0.5) / n_steps as f64)).collect())
    }

    /// Pulls `∂J/∂Δ_j` at step midpoints back onto the knots.
    pub fn knot_gradient(&self, d_controls: &[f64]) -> Result<Vec<f64>> {
        let w = self.waveform()?;
        let n = d_controls.len();
        let mut grad = vec![0.0; self.knots.len()];
        for (j, &g) in d_controls.iter().enumerate() {
            w.accumulate_knot_gradient((j as f64 + 0.5) / n as f64, g, &mut grad);
        }
        Ok(grad)
    }
}

/// Cost sensitivity with respect to the pulse outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseGradient {
    pub duration: f64,
    pub knots: Vec<f64>,
    pub theta_c: f64,
}

/// Cached forward pass for [`ChainedNetwork::backward`].
#[derive(Clone, Debug)]
pub struct ChainCache {
    t_cache: MlpCache,
    c_cache: MlpCache,
}

/// Maps an angle onto `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let w = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainedNetwork {
    config: NetConfig,
    n_t: Mlp,
    n_c: Mlp,
    /// Correction angle produced by a mid-range output.
    theta_center: f64,
}

impl ChainedNetwork {
    pub fn random(config: NetConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let a = config.arch;
        let n_t = Mlp::random(1, a.layers_t, a.width_t, 1, OUTPUT_GAIN, rng)?;
        let outputs = config.n_knots + usize::from(config.correction_head);
        let n_c = Mlp::random(2, a.layers_c, a.width_c, outputs, OUTPUT_GAIN, rng)?;
        Ok(Self { config, n_t, n_c, theta_center: 0.0 })
    }

    pub fn from_parts(config: NetConfig, n_t: Mlp, n_c: Mlp, theta_center: f64) -> Result<Self> {
        config.validate()?;
        let outputs = config.n_knots + usize::from(config.correction_head);
        if n_t.input_dim() != 1 || n_t.output_dim() != 1 || n_c.input_dim() != 2 || n_c.output_dim() != outputs {
            return Err(Error::DimensionMismatch("network shapes do not match the configuration".into()));
        }
        Ok(Self { config, n_t, n_c, theta_center })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn interval(&self) -> Interval {
        self.config.interval
    }

    pub fn set_interval(&mut self, interval: Interval) {
        self.config.interval = interval;
    }

    pub fn n_t(&self) -> &Mlp {
        &self.n_t
    }

    pub fn n_c(&self) -> &Mlp {
        &self.n_c
    }

    pub fn theta_center(&self) -> f64 {
        self.theta_center
    }

    pub fn set_theta_center(&mut self, theta: f64) {
        self.theta_center = wrap_angle(theta);
    }

    pub fn n_params(&self) -> usize {
        self.n_t.n_params() + self.n_c.n_params()
    }

    /// `N_T` parameters followed by `N_C` parameters.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.n_t.params();
        p.extend(self.n_c.params());
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::DimensionMismatch(format!("{} parameters for {}", params.len(), self.n_params())));
        }
        let (pt, pc) = params.split_at(self.n_t.n_params());
        self.n_t.set_params(pt)?;
        self.n_c.set_params(pc)
    }

    pub fn add_to_params(&mut self, step: &[f64]) {
        let (st, sc) = step.split_at(self.n_t.n_params());
        self.n_t.add_to_params(st);
        self.n_c.add_to_params(sc);
    }

    /// Shifts the output biases so that `forward(pulse.phi)` reproduces
    /// `pulse`, up to knots pulled just inside the bounds.
    pub fn anchor(&mut self, pulse: &PulseSpec) -> Result<()> {
        let cfg = self.config;
        if pulse.knots.len() != cfg.n_knots {
            return Err(Error::DimensionMismatch(format!("{} knots for {}", pulse.knots.len(), cfg.n_knots)));
        }
        if !(pulse.duration > 0.0 && pulse.duration < cfg.t_bound) {
            return Err(Error::InvalidArgument(format!("duration {} outside (0, {})", pulse.duration, cfg.t_bound)));
        }
        let logit = |p: f64| {
            let p = p.clamp(1e-9, 1.0 - 1e-9);
            (p / (1.0 - p)).ln()
        };
        let x = pulse.phi / PI;
        self.n_t.set_output_preactivation(&[x], &[logit(pulse.duration / cfg.t_bound)])?;
        let t_in = self.n_t.forward(&[x])[0];
        let mut target: Vec<f64> = pulse.knots.iter().map(|&k| logit(0.5 * (k / cfg.delta_bound + 1.0))).collect();
        if cfg.correction_head {
            target.push(0.0);
        }
        self.n_c.set_output_preactivation(&[x, t_in], &target)?;
        self.set_theta_center(pulse.theta_c);
        Ok(())
    }

    pub fn forward(&self, phi: f64) -> Result<PulseSpec> {
        self.forward_cached(phi).map(|(spec, _)| spec)
    }

    pub fn forward_cached(&self, phi: f64) -> Result<(PulseSpec, ChainCache)> {
        if !(phi > 0.0 && phi <= PI) {
            return Err(Error::InvalidArgument(format!("gate angle {phi} outside (0, π]")));
        }
        let cfg = &self.config;
        let t_cache = self.n_t.forward_cached(&[phi / PI]);
        let duration = cfg.t_bound * t_cache.output()[0];
        let c_cache = self.n_c.forward_cached(&[phi / PI, duration / cfg.t_bound]);
        let out = c_cache.output();
        let knots = out[..cfg.n_knots].iter().map(|&y| cfg.delta_bound * (2.0 * y - 1.0)).collect();
        let theta_c = if cfg.correction_head {
            wrap_angle(self.theta_center + PI * (2.0 * out[cfg.n_knots] - 1.0))
        } else {
            self.theta_center
        };
        Ok((PulseSpec { phi, duration, knots, theta_c }, ChainCache { t_cache, c_cache }))
    }

    /// Accumulates `∂J/∂params` into `grad` given the cost sensitivity to
    /// the pulse produced by the cached forward pass.
    pub fn backward(&self, cache: &ChainCache, d_pulse: &PulseGradient, grad: &mut [f64]) {
        let cfg = &self.config;
        assert_eq!(d_pulse.knots.len(), cfg.n_knots);
        let (gt, gc) = grad.split_at_mut(self.n_t.n_params());
        let mut d_out: Vec<f64> = d_pulse.knots.iter().map(|g| 2.0 * cfg.delta_bound * g).collect();
        if cfg.correction_head {
            d_out.push(2.0 * PI * d_pulse.theta_c);
        }
        let d_in = self.n_c.backward(&cache.c_cache, &d_out, gc);
        // N_C sees T/t_bound, so both paths meet at the N_T output.
        let d_t_out = cfg.t_bound * d_pulse.duration + d_in[1];
        self.n_t.backward(&cache.t_cache, &[d_t_out], gt);
    }
}
