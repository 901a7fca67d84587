// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

//! Time-ordered evolution `U = U_n ⋯ U_1` with `U_j = exp(−i·dt·H(t_j))`
//! sampled at step midpoints, and exact reverse-mode gradients of the
//! discretized product.
//!
//! A globally driven register never couples basis states that differ in which
//! atoms sit in `|0⟩`, so the Hamiltonian is block diagonal. [`Propagator`]
//! finds those blocks once, exponentiates each distinct block a single time
//! per step, and reassembles the full unitary.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{computational_states, expm, expm_frechet, CMatrix, I, ZERO};
use crate::model::ControlModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Exact exponential of the midpoint Hamiltonian; second order in `dt`.
    MidpointExponential,
    /// Classical fourth-order Runge–Kutta on `dU/dt = −iH(t)U`.
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    duration: f64,
    n_steps: usize,
    scheme: Scheme,
}

pub const MIN_STEPS: usize = 8;

/// `max(64, ⌈50·T/2π⌉)` steps.
pub fn default_steps(duration: f64) -> usize {
    let per_cycle = (50.0 * duration / std::f64::consts::TAU).ceil();
    (per_cycle.max(0.0) as usize).max(64)
}

impl TimeGrid {
    pub fn new(duration: f64, n_steps: usize) -> Result<Self> {
        Self::with_scheme(duration, n_steps, Scheme::MidpointExponential)
    }

    pub fn with_scheme(duration: f64, n_steps: usize, scheme: Scheme) -> Result<Self> {
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(Error::InvalidArgument(format!("duration {duration}")));
        }
        if n_steps < MIN_STEPS {
            return Err(Error::InvalidArgument(format!(
                "time grid needs at least {MIN_STEPS} steps, got {n_steps}"
            )));
        }
        Ok(Self { duration, n_steps, scheme })
    }

    pub fn with_default_steps(duration: f64) -> Result<Self> {
        Self::new(duration, default_steps(duration))
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn dt(&self) -> f64 {
        self.duration / self.n_steps as f64
    }

    /// Step midpoints as fractions of the duration, `(j + ½)/n`.
    pub fn midpoint_fractions(&self) -> Vec<f64> {
        let n = self.n_steps as f64;
        (0..self.n_steps).map(|j| (j as f64 + 0.5) / n).collect()
    }
}

/// Outcome of one evolution.
#[derive(Clone, Debug)]
pub struct Propagation {
    pub final_unitary: CMatrix,
    /// `∫ ⟨ψ_c(t)|N_r|ψ_c(t)⟩ dt` for each computational input state `c`, in
    /// binary order.
    pub rydberg_time: Vec<f64>,
    tape: Option<Tape>,
}

impl Propagation {
    /// Mean over computational inputs of the time-integrated Rydberg
    /// population.
    pub fn integrated_rydberg_population(&self) -> f64 {
        self.rydberg_time.iter().sum::<f64>() / self.rydberg_time.len().max(1) as f64
    }

    pub fn has_tape(&self) -> bool {
        self.tape.is_some()
    }
}

/// Gradient of a scalar cost of the final unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    /// `∂J/∂Δ_j` for the per-step detunings.
    pub controls: Vec<f64>,
    /// `∂J/∂T` with the per-step detunings held fixed.
    pub duration: f64,
}

#[derive(Clone, Debug)]
struct Block {
    indices: Vec<usize>,
    unique: usize,
}

#[derive(Clone, Debug)]
struct UniqueBlock {
    drift: CMatrix,
    generator: CMatrix,
    rydberg: Vec<f64>,
}

impl UniqueBlock {
    fn hamiltonian(&self, delta: f64) -> CMatrix {
        &self.drift + &self.generator.scale_real(delta)
    }
}

#[derive(Clone, Debug)]
struct BlockTape {
    steps: Vec<CMatrix>,
    derivs: Vec<CMatrix>,
    /// Cumulative products `X_j = U_j ⋯ U_1`, with `X_0 = 1`.
    cumulative: Vec<CMatrix>,
}

#[derive(Clone, Debug)]
struct Tape {
    controls: Vec<f64>,
    blocks: Vec<BlockTape>,
}

/// Evolution engine for one [`ControlModel`].
#[derive(Clone, Debug)]
pub struct Propagator {
    dim: usize,
    n_atoms: usize,
    blocks: Vec<Block>,
    unique: Vec<UniqueBlock>,
}

fn connected_components(dim: usize, linked: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..dim).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..dim {
        for j in i + 1..dim {
            if linked(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; dim];
    for i in 0..dim {
        let r = find(&mut parent, i);
        if root_slot[r] == usize::MAX {
            root_slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_slot[r]].push(i);
    }
    groups
}

impl Propagator {
    pub fn new(model: &ControlModel) -> Self {
        let (drift, gen) = (model.drift(), model.generator());
        let dim = model.dim();
        let groups = connected_components(dim, |i, j| {
            drift[(i, j)] != ZERO || drift[(j, i)] != ZERO || gen[(i, j)] != ZERO || gen[(j, i)] != ZERO
        });
        let mut unique: Vec<UniqueBlock> = Vec::new();
        let mut blocks = Vec::with_capacity(groups.len());
        for indices in groups {
            let cand = UniqueBlock {
                drift: drift.submatrix(&indices),
                generator: gen.submatrix(&indices),
                rydberg: indices.iter().map(|&i| model.rydberg_count()[i]).collect(),
            };
            let slot = unique.iter().position(|u| {
                u.drift == cand.drift && u.generator == cand.generator && u.rydberg == cand.rydberg
            });
            let unique_idx = slot.unwrap_or_else(|| {
                unique.push(cand);
                unique.len() - 1
            });
            blocks.push(Block { indices, unique: unique_idx });
        }
        Self { dim, n_atoms: model.n_atoms(), blocks, unique }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sizes of the distinct diagonal blocks the evolution is split into.
    pub fn unique_block_dims(&self) -> Vec<usize> {
        self.unique.iter().map(|u| u.drift.dim()).collect()
    }

    /// Evolves under per-step detunings `controls` over `duration`; with
    /// `record` set, keeps the tape needed by [`Propagation::backward`].
    pub fn evolve_controls(&self, controls: &[f64], duration: f64, record: bool) -> Result<Propagation> {
        if let Some((j, v)) = controls.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("detuning at step {j} is {v}")));
        }
        let grid = TimeGrid::new(duration, controls.len())?;
        let dt = grid.dt();
        let n = controls.len();

        let mut block_tapes = Vec::with_capacity(self.unique.len());
        for ub in &self.unique {
            let b = ub.drift.dim();
            let mut steps = Vec::with_capacity(n);
            let mut derivs = Vec::with_capacity(if record { n } else { 0 });
            let mut cumulative = Vec::with_capacity(n + 1);
            cumulative.push(CMatrix::identity(b));
            let direction = ub.generator.scale(-I * dt);
            for &delta in controls {
                let a = ub.hamiltonian(delta).scale(-I * dt);
                let u = if record {
                    let (u, l) = expm_frechet(&a, &direction);
                    derivs.push(l);
                    u
                } else {
                    expm(&a)
                };
                let next = u.matmul(cumulative.last().expect("X_0 present"));
                cumulative.push(next);
                steps.push(u);
            }
            block_tapes.push(BlockTape { steps, derivs, cumulative });
        }

        let mut final_unitary = CMatrix::zeros(self.dim);
        for blk in &self.blocks {
            let x = block_tapes[blk.unique].cumulative.last().expect("nonempty");
            for (a, &i) in blk.indices.iter().enumerate() {
                for (b, &j) in blk.indices.iter().enumerate() {
                    final_unitary[(i, j)] = x[(a, b)];
                }
            }
        }
        if !final_unitary.is_finite() {
            return Err(Error::NonFinite("propagated unitary".into()));
        }

        let rydberg_time = self.rydberg_time(&block_tapes, dt);
        let tape = record.then(|| Tape { controls: controls.to_vec(), blocks: block_tapes });
        Ok(Propagation { final_unitary, rydberg_time, tape })
    }

    /// Evolves under a detuning waveform sampled at the grid midpoints.
    pub fn evolve(&self, waveform: impl Fn(f64) -> f64, grid: &TimeGrid) -> Result<Propagation> {
        if grid.scheme() != Scheme::MidpointExponential {
            return Err(Error::Unsupported("block propagation uses the midpoint exponential".into()));
        }
        let controls: Vec<f64> =
            grid.midpoint_fractions().iter().map(|s| waveform(s * grid.duration())).collect();
        self.evolve_controls(&controls, grid.duration(), false)
    }

    fn rydberg_time(&self, tapes: &[BlockTape], dt: f64) -> Vec<f64> {
        let comp = computational_states(self.n_atoms);
        comp.iter()
            .map(|&c| {
                let blk = self.blocks.iter().find(|b| b.indices.contains(&c)).expect("covered");
                let local = blk.indices.iter().position(|&i| i == c).expect("member");
                let ub = &self.unique[blk.unique];
                let tape = &tapes[blk.unique];
                let pop = |x: &CMatrix| -> f64 {
                    (0..x.dim()).map(|a| ub.rydberg[a] * x[(a, local)].norm_sqr()).sum()
                };
                let p: Vec<f64> = tape.cumulative.iter().map(pop).collect();
                p.windows(2).map(|w| 0.5 * dt * (w[0] + w[1])).sum()
            })
            .collect()
    }

    /// Computational-basis block rows/cols are global indices; this maps a
    /// full-space seed onto the per-block seeds and runs the adjoint sweep.
    fn backward(&self, tape: &Tape, seed: &CMatrix) -> Result<Gradient> {
        if seed.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "seed is {}x{}, register is {}",
                seed.dim(),
                seed.dim(),
                self.dim
            )));
        }
        let n = tape.controls.len();
        let mut local_seeds: Vec<CMatrix> =
            self.unique.iter().map(|u| CMatrix::zeros(u.drift.dim())).collect();
        for blk in &self.blocks {
            let s = &mut local_seeds[blk.unique];
            for (a, &i) in blk.indices.iter().enumerate() {
                for (b, &j) in blk.indices.iter().enumerate() {
                    s[(a, b)] += seed[(i, j)];
                }
            }
        }

        let mut d_controls = vec![0.0; n];
        let mut d_duration = 0.0;
        let inv_n = 1.0 / n as f64;
        for (u_idx, ub) in self.unique.iter().enumerate() {
            let bt = &tape.blocks[u_idx];
            let g = &local_seeds[u_idx];
            let b = g.dim();
            for col in 0..b {
                let mut lambda = g.column(col);
                if lambda.iter().all(|&z| z == ZERO) {
                    continue;
                }
                for j in (0..n).rev() {
                    let psi_prev = bt.cumulative[j].column(col);
                    let psi = bt.cumulative[j + 1].column(col);
                    let dpsi = bt.derivs[j].matvec(&psi_prev);
                    d_controls[j] += inner(&lambda, &dpsi).re;
                    let h_psi = ub.hamiltonian(tape.controls[j]).matvec(&psi);
                    let gen_psi: Vec<C64> = h_psi.iter().map(|&z| -I * z).collect();
                    d_duration += inner(&lambda, &gen_psi).re * inv_n;
                    lambda = bt.steps[j].adjoint_matvec(&lambda);
                }
            }
        }
        Ok(Gradient { controls: d_controls, duration: d_duration })
    }
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

impl Propagation {
    /// Pulls a cost seed `G = ∂J/∂U` (so that `dJ = Re Tr(G†·dU)`) back to the
    /// per-step detunings and the duration.
    pub fn backward(&self, propagator: &Propagator, seed: &CMatrix) -> Result<Gradient> {
        let tape = self.tape.as_ref().ok_or(Error::MissingTape)?;
        propagator.backward(tape, seed)
    }
}

/// Dense evolution under an arbitrary time-dependent Hamiltonian. `rydberg`
/// gives the Rydberg-excitation count of each basis state and drives the
/// population bookkeeping.
pub fn evolve_fn(
    h_of_t: impl Fn(f64) -> CMatrix,
    grid: &TimeGrid,
    rydberg: &[f64],
    n_atoms: usize,
) -> Result<Propagation> {
    let dim = rydberg.len();
    let dt = grid.dt();
    let mut u = CMatrix::identity(dim);
    let comp = computational_states(n_atoms);
    let pop = |u: &CMatrix| -> Vec<f64> {
        comp.iter()
            .map(|&c| (0..dim).map(|a| rydberg[a] * u[(a, c)].norm_sqr()).sum())
            .collect()
    };
    let mut prev = pop(&u);
    let mut rydberg_time = vec![0.0; comp.len()];
    let checked = |t: f64| -> Result<CMatrix> {
        let h = h_of_t(t);
        if h.dim() != dim {
            return Err(Error::DimensionMismatch(format!("H(t) is {}x{}, expected {dim}", h.dim(), h.dim())));
        }
        if !h.is_finite() {
            return Err(Error::NonFinite(format!("Hamiltonian at t = {t}")));
        }
        Ok(h)
    };
    for j in 0..grid.n_steps() {
        let t0 = j as f64 * dt;
        u = match grid.scheme() {
            Scheme::MidpointExponential => {
                let h = checked(t0 + 0.5 * dt)?;
                expm(&h.scale(-I * dt)).matmul(&u)
            }
            Scheme::Rk4 => {
                let f = |h: &CMatrix, x: &CMatrix| h.matmul(x).scale(-I);
                let (h0, hm, h1) = (checked(t0)?, checked(t0 + 0.5 * dt)?, checked(t0 + dt)?);
                let k1 = f(&h0, &u);
                let k2 = f(&hm, &(&u + &k1.scale_real(0.5 * dt)));
                let k3 = f(&hm, &(&u + &k2.scale_real(0.5 * dt)));
                let k4 = f(&h1, &(&u + &k3.scale_real(dt)));
                let incr = &(&k1 + &k2.scale_real(2.0)) + &(&k3.scale_real(2.0) + &k4);
                &u + &incr.scale_real(dt / 6.0)
            }
        };
        let now = pop(&u);
        for ((acc, a), b) in rydberg_time.iter_mut().zip(&prev).zip(&now) {
            *acc += 0.5 * dt * (a + b);
        }
        prev = now;
    }
    Ok(Propagation { final_unitary: u, rydberg_time, tape: None })
}
