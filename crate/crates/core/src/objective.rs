// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

//! Gate fidelities against `C_kP(φ)`, the batch costs used in training, and
//! the split of infidelity into decay and finite-blockade parts.
//!
//! The realized gate is `R_Z(θ_c)^{⊗N} · M`, where `M` is the computational
//! block of the evolved unitary and `R_Z(θ) = diag(1, e^{−iθ})`. Fidelity is
//! the squared trace overlap `|Tr(U_tgt† R M)|² / d²` with `d = 2^N`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::ansatz::{PulseGradient, PulseSpec};
use crate::error::{Error, Result};
use crate::linalg::{computational_states, register_dim, CMatrix, I, ZERO};
use crate::model::{AtomSystem, Blockade, ControlModel};
use crate::propagator::{Propagation, Propagator};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateTarget {
    k: usize,
    phi: f64,
}

impl GateTarget {
    pub fn new(k: usize, phi: f64) -> Result<Self> {
        if !(1..=2).contains(&k) {
            return Err(Error::Unsupported(format!("gates with {k} controls")));
        }
        if !(phi > 0.0 && phi <= PI) {
            return Err(Error::InvalidArgument(format!("gate angle {phi} outside (0, π]")));
        }
        Ok(Self { k, phi })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn n_atoms(&self) -> usize {
        self.k + 1
    }

    /// Dimension of the computational space, `2^{k+1}`.
    pub fn dim(&self) -> usize {
        1 << self.n_atoms()
    }

    /// Diagonal of the target: `e^{iφ}` on the all-ones state, `1` elsewhere.
    pub fn diagonal(&self) -> Vec<C64> {
        let d = self.dim();
        let mut diag = vec![C64::new(1.0, 0.0); d];
        diag[d - 1] = C64::from_polar(1.0, self.phi);
        diag
    }
}

pub fn target_unitary(target: &GateTarget) -> CMatrix {
    CMatrix::from_diag(&target.diagonal())
}

fn ones_count(n_atoms: usize) -> Vec<f64> {
    (0..1usize << n_atoms).map(|i| i.count_ones() as f64).collect()
}

/// Diagonal of `R_Z(θ)^{⊗N}` on the computational states in binary order.
pub fn rz_phases(n_atoms: usize, theta: f64) -> Vec<C64> {
    ones_count(n_atoms).iter().map(|&n| C64::from_polar(1.0, -n * theta)).collect()
}

/// Computational block `M = P U P` of a unitary on the `3^N` register (or
/// the block itself when `u` is already `2^N`-dimensional).
pub fn computational_block(u: &CMatrix, n_atoms: usize) -> Result<CMatrix> {
    if u.dim() == 1 << n_atoms {
        return Ok(u.clone());
    }
    if u.dim() != register_dim(n_atoms) {
        return Err(Error::DimensionMismatch(format!("{}-dim unitary for {n_atoms} atoms", u.dim())));
    }
    Ok(u.submatrix(&computational_states(n_atoms)))
}

fn overlap(m: &CMatrix, target: &GateTarget, theta_c: f64) -> C64 {
    let r = rz_phases(target.n_atoms(), theta_c);
    target.diagonal().iter().zip(&r).enumerate().map(|(i, (t, r))| t.conj() * r * m[(i, i)]).sum()
}

pub fn gate_fidelity(u_out: &CMatrix, target: &GateTarget, theta_c: f64) -> Result<f64> {
    let m = computational_block(u_out, target.n_atoms())?;
    let d = target.dim() as f64;
    Ok(overlap(&m, target, theta_c).norm_sqr() / (d * d))
}

/// Fidelity with its sensitivities.
#[derive(Clone, Debug)]
pub struct FidelityGrad {
    pub fidelity: f64,
    /// `G` with `dF = Re Tr(G† dU)` over the full register.
    pub seed: CMatrix,
    pub d_theta: f64,
}

pub fn gate_fidelity_grad(u_out: &CMatrix, target: &GateTarget, theta_c: f64) -> Result<FidelityGrad> {
    let n = target.n_atoms();
    if u_out.dim() != register_dim(n) {
        return Err(Error::DimensionMismatch(format!("{}-dim unitary for {n} atoms", u_out.dim())));
    }
    let comp = computational_states(n);
    let d = target.dim() as f64;
    let t = target.diagonal();
    let r = rz_phases(n, theta_c);
    let counts = ones_count(n);
    let mut z = ZERO;
    let mut dz_theta = ZERO;
    for (i, &c) in comp.iter().enumerate() {
        let term = t[i].conj() * r[i] * u_out[(c, c)];
        z += term;
        dz_theta += -I * counts[i] * term;
    }
    let mut seed = CMatrix::zeros(u_out.dim());
    for (i, &c) in comp.iter().enumerate() {
        seed[(c, c)] = z * t[i] * r[i].conj() * (2.0 / (d * d));
    }
    Ok(FidelityGrad {
        fidelity: z.norm_sqr() / (d * d),
        seed,
        d_theta: 2.0 * (z.conj() * dz_theta).re / (d * d),
    })
}

/// Correction angle maximizing the fidelity over a uniform grid of
/// `(−π, π]`.
pub fn best_theta(u_out: &CMatrix, target: &GateTarget, n_grid: usize) -> Result<(f64, f64)> {
    let m = computational_block(u_out, target.n_atoms())?;
    let d = target.dim() as f64;
    let mut best = (0.0, f64::NEG_INFINITY);
    for j in 1..=n_grid.max(1) {
        let theta = -PI + 2.0 * PI * j as f64 / n_grid.max(1) as f64;
        let f = overlap(&m, target, theta).norm_sqr() / (d * d);
        if f > best.1 {
            best = (theta, f);
        }
    }
    Ok(best)
}

/// Leakage-aware state-averaged fidelity
/// `(Tr(M†M) + |Tr(U_tgt† R M)|²) / (d(d+1))`.
pub fn haar_avg_fidelity(u_out: &CMatrix, target: &GateTarget, theta_c: f64) -> Result<f64> {
    let m = computational_block(u_out, target.n_atoms())?;
    let d = target.dim() as f64;
    let tr_mm: f64 = m.as_slice().iter().map(|z| z.norm_sqr()).sum();
    Ok((tr_mm + overlap(&m, target, theta_c).norm_sqr()) / (d * (d + 1.0)))
}

/// One evaluated batch element.
#[derive(Clone, Debug)]
pub struct Sample {
    pub phi: f64,
    pub u_out: CMatrix,
    pub theta_c: f64,
}

/// Mean infidelity `⟨1 − F⟩` over the samples.
pub fn cost_j(samples: &[Sample], k: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut total = 0.0;
    for s in samples {
        total += 1.0 - gate_fidelity(&s.u_out, &GateTarget::new(k, s.phi)?, s.theta_c)?;
    }
    Ok(total / samples.len() as f64)
}

/// `J + μ·⟨T_φ⟩`.
pub fn cost_j_opt(j: f64, durations: &[f64], mu: f64) -> Result<f64> {
    if !(mu >= 0.0) {
        return Err(Error::InvalidArgument(format!("time penalty {mu}")));
    }
    if durations.is_empty() {
        return Ok(j);
    }
    Ok(j + mu * durations.iter().sum::<f64>() / durations.len() as f64)
}

/// Default time penalty once the fidelity target is in reach.
pub const DEFAULT_MU: f64 = 1e-4;

/// Infidelity of one pulse and its gradient with respect to the pulse
/// outputs, propagated on `n_steps` midpoint steps.
pub fn pulse_infidelity_grad(
    propagator: &Propagator,
    pulse: &PulseSpec,
    target: &GateTarget,
    n_steps: usize,
) -> Result<(f64, PulseGradient)> {
    let controls = pulse.step_controls(n_steps)?;
    let prop = propagator.evolve_controls(&controls, pulse.duration, true)?;
    let fg = gate_fidelity_grad(&prop.final_unitary, target, pulse.theta_c)?;
    let seed = fg.seed.scale_real(-1.0);
    let grad = prop.backward(propagator, &seed)?;
    let knots = pulse.knot_gradient(&grad.controls)?;
    Ok((1.0 - fg.fidelity, PulseGradient { duration: grad.duration, knots, theta_c: -fg.d_theta }))
}

pub fn propagate_pulse(propagator: &Propagator, pulse: &PulseSpec, n_steps: usize) -> Result<Propagation> {
    propagator.evolve_controls(&pulse.step_controls(n_steps)?, pulse.duration, false)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    /// `1 − F` under the evaluation system (finite blockade, decay).
    pub infid_total: f64,
    /// `F(Γ = 0) − F(Γ)`.
    pub infid_decay: f64,
    /// `F(B → ∞) − F(B)`, both without decay. Signed: a pulse tuned to the
    /// finite blockade may do better there than in the ideal model.
    pub infid_blockade: f64,
    /// `1 − F(Γ = 0)` under the evaluation blockade.
    pub infid_no_decay: f64,
    /// `1 − F′` under the evaluation system.
    pub infid_haar: f64,
    pub theta_c_used: f64,
}

/// Propagators for the three models behind a [`FidelityReport`].
#[derive(Clone, Debug)]
pub struct Decomposer {
    k: usize,
    with_decay: Propagator,
    without_decay: Propagator,
    ideal: Propagator,
    ideal_is_eval: bool,
    gamma_zero: bool,
}

impl Decomposer {
    pub fn new(k: usize, sys: &AtomSystem) -> Result<Self> {
        if sys.n_atoms != k + 1 {
            return Err(Error::DimensionMismatch(format!("{} atoms for a gate with {k} controls", sys.n_atoms)));
        }
        let no_decay = sys.with_gamma(0.0);
        let ideal = no_decay.with_blockade(Blockade::Infinite);
        Ok(Self {
            k,
            with_decay: Propagator::new(&ControlModel::for_system(sys)?),
            without_decay: Propagator::new(&ControlModel::for_system(&no_decay)?),
            ideal: Propagator::new(&ControlModel::for_system(&ideal)?),
            ideal_is_eval: sys.blockade.is_infinite(),
            gamma_zero: sys.gamma == 0.0,
        })
    }

    /// Propagator of the evaluation system itself.
    pub fn propagator(&self) -> &Propagator {
        &self.with_decay
    }

    pub fn report(&self, pulse: &PulseSpec, n_steps: usize) -> Result<FidelityReport> {
        let target = GateTarget::new(self.k, pulse.phi)?;
        let u = propagate_pulse(&self.with_decay, pulse, n_steps)?.final_unitary;
        let f = gate_fidelity(&u, &target, pulse.theta_c)?;
        let f_haar = haar_avg_fidelity(&u, &target, pulse.theta_c)?;
        let f_clean = if self.gamma_zero {
            f
        } else {
            gate_fidelity(&propagate_pulse(&self.without_decay, pulse, n_steps)?.final_unitary, &target, pulse.theta_c)?
        };
        let f_ideal = if self.ideal_is_eval {
            f_clean
        } else {
            gate_fidelity(&propagate_pulse(&self.ideal, pulse, n_steps)?.final_unitary, &target, pulse.theta_c)?
        };
        Ok(FidelityReport {
            infid_total: 1.0 - f,
            infid_decay: f_clean - f,
            infid_blockade: f_ideal - f_clean,
            infid_no_decay: 1.0 - f_clean,
            infid_haar: 1.0 - f_haar,
            theta_c_used: pulse.theta_c,
        })
    }
}

pub fn infidelity_decomposition(pulse: &PulseSpec, k: usize, sys: &AtomSystem, n_steps: usize) -> Result<FidelityReport> {
    Decomposer::new(k, sys)?.report(pulse, n_steps)
}
