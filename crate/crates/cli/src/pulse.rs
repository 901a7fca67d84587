// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

//! Versioned JSON export of one detuning pulse on a uniform time grid, in
//! internal and laboratory units.

use std::path::Path;

use anyhow::{bail, ensure, Context};
use serde::{Deserialize, Serialize};

use rydgate_core::ansatz::{PulseSpec, Waveform, DELTA_BOUND};

use crate::config::Gate;
use crate::units::Units;

pub const PULSE_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseHeader {
    pub format_version: u32,
    pub gate: Gate,
    pub phi: f64,
    /// Duration in units of `1/Ω_max`.
    pub duration: f64,
    pub duration_us: f64,
    pub theta_c: f64,
    /// `Ω_max / 2π` used for the laboratory columns.
    pub rabi_mhz: f64,
    /// Propagation steps of the reference simulation.
    pub n_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseFile {
    pub header: PulseHeader,
    /// Uniform grid from `0` to the duration, in `1/Ω_max`.
    pub time: Vec<f64>,
    pub time_us: Vec<f64>,
    /// `Δ/Ω_max`.
    pub detuning: Vec<f64>,
    /// `Δ/2π` in MHz.
    pub detuning_mhz: Vec<f64>,
}

impl PulseFile {
    /// Samples `pulse` at `resolution + 1` evenly spaced times.
    pub fn from_pulse(gate: Gate, pulse: &PulseSpec, resolution: usize, n_steps: usize, units: Units) -> anyhow::Result<Self> {
        ensure!(resolution >= 1, "grid resolution must be at least 1");
        let time: Vec<f64> =
            (0..=resolution).map(|i| if i == resolution { pulse.duration } else { pulse.duration * i as f64 / resolution as f64 }).collect();
        let detuning = time.iter().map(|&t| pulse.detuning(t)).collect::<Result<Vec<_>, _>>()?;
        let file = Self {
            header: PulseHeader {
                format_version: PULSE_FORMAT_VERSION,
                gate,
                phi: pulse.phi,
                duration: pulse.duration,
                duration_us: units.time_to_us(pulse.duration),
                theta_c: pulse.theta_c,
                rabi_mhz: units.rabi_mhz,
                n_steps,
            },
            time_us: time.iter().map(|&t| units.time_to_us(t)).collect(),
            detuning_mhz: detuning.iter().map(|&d| units.detuning_to_mhz(d)).collect(),
            time,
            detuning,
        };
        file.validate()?;
        Ok(file)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let h = &self.header;
        if h.format_version != PULSE_FORMAT_VERSION {
            bail!("pulse format version {} (expected {PULSE_FORMAT_VERSION})", h.format_version);
        }
        let n = self.time.len();
        ensure!(n >= 2, "a pulse needs at least two samples");
        ensure!(
            self.time_us.len() == n && self.detuning.len() == n && self.detuning_mhz.len() == n,
            "pulse columns differ in length"
        );
        ensure!(self.time.windows(2).all(|w| w[1] > w[0]), "time grid is not strictly increasing");
        ensure!(self.time[0] == 0.0 && self.time[n - 1] == h.duration, "time grid does not span the pulse");
        let step = h.duration / (n - 1) as f64;
        ensure!(
            self.time.iter().enumerate().all(|(i, &t)| (t - i as f64 * step).abs() <= 1e-9 * h.duration),
            "time grid is not uniform"
        );
        ensure!(self.detuning.iter().all(|d| d.abs() < DELTA_BOUND), "detuning exceeds ±{DELTA_BOUND} Ω_max");
        let units = Units::new(h.rabi_mhz)?;
        ensure!(
            self.detuning.iter().zip(&self.detuning_mhz).all(|(&d, &m)| (units.detuning_from_mhz(m) - d).abs() <= 1e-9),
            "detuning columns disagree"
        );
        Ok(())
    }

    /// Pulse interpolating the stored samples with the same monotone cubic
    /// used by the ansatz.
    pub fn to_pulse(&self) -> anyhow::Result<PulseSpec> {
        self.validate()?;
        Waveform::new(&self.detuning)?;
        Ok(PulseSpec {
            phi: self.header.phi,
            duration: self.header.duration,
            knots: self.detuning.clone(),
            theta_c: self.header.theta_c,
        })
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading pulse {}", path.display()))?;
        let file: Self = serde_json::from_str(&text).with_context(|| format!("parsing pulse {}", path.display()))?;
        file.validate()?;
        Ok(file)
    }

    pub fn to_json(&self) -> anyhow::Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}
