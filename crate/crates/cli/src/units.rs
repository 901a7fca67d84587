// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

//! Conversion between internal units (`ħ = Ω_max = 1`) and laboratory units.
//! Frequencies in MHz are ordinary frequencies, so `Ω_max = 2π × rabi_mhz`
//! rad/μs.

use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Units {
    /// `Ω_max / 2π` in MHz.
    pub rabi_mhz: f64,
}

impl Units {
    pub fn new(rabi_mhz: f64) -> anyhow::Result<Self> {
        anyhow::ensure!(rabi_mhz > 0.0 && rabi_mhz.is_finite(), "rabi frequency must be positive, got {rabi_mhz}");
        Ok(Self { rabi_mhz })
    }

    /// `Ω_max` in rad/μs.
    pub fn omega_max(&self) -> f64 {
        2.0 * PI * self.rabi_mhz
    }

    pub fn time_to_us(&self, t: f64) -> f64 {
        t / self.omega_max()
    }

    pub fn time_from_us(&self, us: f64) -> f64 {
        us * self.omega_max()
    }

    pub fn detuning_to_mhz(&self, delta: f64) -> f64 {
        delta * self.rabi_mhz
    }

    pub fn detuning_from_mhz(&self, mhz: f64) -> f64 {
        mhz / self.rabi_mhz
    }

    /// Decay rate `Γ/Ω_max` for a Rydberg lifetime in μs.
    pub fn gamma_from_lifetime_us(&self, lifetime_us: f64) -> f64 {
        1.0 / self.time_from_us(lifetime_us)
    }
}
