// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

//! TOML run configuration. Physical units are converted to internal units
//! once, in [`RunConfig::system`].

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use rydgate_core::ansatz::{Arch, NetConfig};
use rydgate_core::evaluation::DEFAULT_EVAL_SAMPLES;
use rydgate_core::model::{AtomSystem, Blockade};
use rydgate_core::trainer::{TrainConfig, DEFAULT_EVAL_B};

use crate::units::Units;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Gate {
    C1p,
    C2p,
}

impl Gate {
    pub fn k(self) -> usize {
        match self {
            Gate::C1p => 1,
            Gate::C2p => 2,
        }
    }

    pub fn from_k(k: usize) -> anyhow::Result<Self> {
        match k {
            1 => Ok(Gate::C1p),
            2 => Ok(Gate::C2p),
            _ => bail!("no gate with {k} controls"),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gate::C1p => "c1p",
            Gate::C2p => "c2p",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockadeWord {
    Infinite,
}

/// `blockade = 21.1` or `blockade = "infinite"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BlockadeSetting {
    Finite(f64),
    Word(BlockadeWord),
}

impl BlockadeSetting {
    pub fn to_blockade(self) -> Blockade {
        match self {
            BlockadeSetting::Finite(b) => Blockade::Finite(b),
            BlockadeSetting::Word(BlockadeWord::Infinite) => Blockade::Infinite,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    /// `Ω_max / 2π` in MHz.
    pub rabi_mhz: f64,
    /// Rydberg-state lifetime in μs.
    pub lifetime_us: f64,
    pub decay: bool,
    /// Blockade strength `V/Ω_max` used for evaluation and finite-blockade
    /// training.
    pub blockade: BlockadeSetting,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self { rabi_mhz: 10.0, lifetime_us: 96.5, decay: true, blockade: BlockadeSetting::Finite(DEFAULT_EVAL_B) }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// `[m_L^T, m_N^T, m_L^C, m_N^C]`; the gate default when absent.
    pub arch: Option<[usize; 4]>,
    pub n_knots: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub samples: usize,
    pub n_steps: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { samples: DEFAULT_EVAL_SAMPLES, n_steps: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gate: Option<Gate>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub physics: PhysicsConfig,
    pub network: NetworkConfig,
    /// Training options; `eval_b` is taken from `physics.blockade`.
    pub train: Option<TrainConfig>,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let p = &self.physics;
        Units::new(p.rabi_mhz)?;
        if !(p.lifetime_us > 0.0 && p.lifetime_us.is_finite()) {
            bail!("physics.lifetime_us must be positive");
        }
        if let BlockadeSetting::Finite(b) = p.blockade {
            if !(b > 0.0 && b.is_finite()) {
                bail!("physics.blockade must be positive or \"infinite\"");
            }
        }
        if self.eval.samples == 0 {
            bail!("eval.samples must be at least 1");
        }
        if let Some(t) = &self.train {
            t.validate()?;
        }
        Ok(())
    }

    pub fn units(&self) -> Units {
        Units { rabi_mhz: self.physics.rabi_mhz }
    }

    pub fn gamma(&self) -> f64 {
        if self.physics.decay {
            self.units().gamma_from_lifetime_us(self.physics.lifetime_us)
        } else {
            0.0
        }
    }

    pub fn system(&self, gate: Gate) -> anyhow::Result<AtomSystem> {
        Ok(AtomSystem::new(gate.k() + 1, self.physics.blockade.to_blockade(), self.gamma())?)
    }

    pub fn net_config(&self, gate: Gate) -> anyhow::Result<NetConfig> {
        let mut cfg = NetConfig::for_gate(gate.k())?;
        if let Some([a, b, c, d]) = self.network.arch {
            cfg.arch = Arch::new(a, b, c, d);
        }
        if let Some(n) = self.network.n_knots {
            cfg.n_knots = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train_config(&self, gate: Gate) -> anyhow::Result<TrainConfig> {
        let mut cfg = match &self.train {
            Some(t) => t.clone(),
            None => TrainConfig::for_gate(gate.k())?,
        };
        match self.physics.blockade {
            BlockadeSetting::Finite(b) => cfg.eval_b = b,
            BlockadeSetting::Word(_) => bail!("training needs a finite physics.blockade"),
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.physics, PhysicsConfig::default());
        assert_eq!(cfg.eval.samples, 200);
        let sys = cfg.system(Gate::C1p).unwrap();
        assert_eq!(sys.n_atoms, 2);
        assert!((1.0 / sys.gamma - 6063.3).abs() < 0.1);
        assert_eq!(cfg.train_config(Gate::C2p).unwrap().intervals, 14);
    }

    #[test]
    fn parses_full_config() {
        let cfg = RunConfig::parse(
            r#"
            gate = "c2p"
            seed = 9
            [physics]
            rabi_mhz = 5.0
            decay = false
            blockade = "infinite"
            [network]
            arch = [3, 8, 3, 16]
            n_knots = 12
            [train]
            batch_m = 4
            [eval]
            samples = 10
            "#,
        )
        .unwrap();
        assert_eq!(cfg.gate, Some(Gate::C2p));
        assert_eq!(cfg.system(Gate::C2p).unwrap().gamma, 0.0);
        assert!(cfg.system(Gate::C2p).unwrap().blockade.is_infinite());
        assert_eq!(cfg.net_config(Gate::C2p).unwrap().n_knots, 12);
        assert!(cfg.train_config(Gate::C2p).is_err());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::parse("colour = 3").is_err());
        assert!(RunConfig::parse("[physics]\nrabbi_mhz = 3.0").is_err());
        assert!(RunConfig::parse("[train]\nlearning_rat = 0.1").is_err());
        assert!(RunConfig::parse("[physics]\nblockade = -1.0").is_err());
        assert!(RunConfig::parse("[physics]\nblockade = \"huge\"").is_err());
        assert!(RunConfig::parse("[eval]\nsamples = 0").is_err());
    }

    #[test]
    fn seed_overrides_train_seed() {
        let cfg = RunConfig::parse("seed = 42\n[train]\nseed = 1").unwrap();
        assert_eq!(cfg.train_config(Gate::C1p).unwrap().seed, 42);
    }
}
