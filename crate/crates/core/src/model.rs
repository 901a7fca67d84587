// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

//! Hamiltonians of globally driven registers of three-level atoms.
//!
//! Units: `ħ = 1`, frequencies in units of the maximal Rabi frequency and
//! times in `1/Ω_max`. Doubly excited states sit at `+B·Ω_max` per Rydberg
//! pair, and decay enters as `−iΓ/2` per Rydberg excitation so that a lone
//! `|r⟩` amplitude decays as `e^{−Γt/2}`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, register_dim, BasisIndex, CMatrix, Level, StateVector, I, ONE, ZERO};

/// Pair interaction strength in units of `Ω_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Blockade {
    Finite(f64),
    Infinite,
}

impl Blockade {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Blockade::Infinite)
    }
}

impl std::fmt::Display for Blockade {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Blockade::Finite(b) => write!(f, "B={b}"),
            Blockade::Infinite => write!(f, "B=inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomSystem {
    pub n_atoms: usize,
    /// Rabi amplitude; `1.0` in internal units.
    pub omega_max: f64,
    pub blockade: Blockade,
    /// Decay rate of `|r⟩` in units of `Ω_max`.
    pub gamma: f64,
    pub equidistant: bool,
}

impl AtomSystem {
    pub fn new(n_atoms: usize, blockade: Blockade, gamma: f64) -> Result<Self> {
        let sys = Self { n_atoms, omega_max: 1.0, blockade, gamma, equidistant: true };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(Error::InvalidArgument("register needs at least one atom".into()));
        }
        if !(self.omega_max > 0.0 && self.omega_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("omega_max = {}", self.omega_max)));
        }
        if let Blockade::Finite(b) = self.blockade {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidArgument(format!("blockade strength B = {b}")));
            }
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("decay rate gamma = {}", self.gamma)));
        }
        Ok(())
    }

    pub fn with_blockade(mut self, blockade: Blockade) -> Self {
        self.blockade = blockade;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn dim(&self) -> usize {
        register_dim(self.n_atoms)
    }
}

/// Instantaneous drive: Rabi frequency and detuning.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlValue {
    pub omega: f64,
    pub delta: f64,
}

impl ControlValue {
    pub fn new(omega: f64, delta: f64) -> Self {
        Self { omega, delta }
    }
}

/// Single-atom Hamiltonian on `{|0⟩, |1⟩, |r⟩}`.
pub fn h_single(cv: ControlValue) -> CMatrix {
    let mut h = CMatrix::zeros(3);
    let half = C64::new(cv.omega / 2.0, 0.0);
    h[(1, 2)] = half;
    h[(2, 1)] = half;
    h[(2, 2)] = C64::new(-cv.delta, 0.0);
    h
}

/// `1 ⊗ … ⊗ op_site ⊗ … ⊗ 1` on an `n_atoms` register.
pub fn embed(op: &CMatrix, site: usize, n_atoms: usize) -> CMatrix {
    assert!(site < n_atoms, "site {site} outside a {n_atoms}-atom register");
    let id = CMatrix::identity(op.dim());
    (0..n_atoms)
        .map(|k| if k == site { op } else { &id })
        .fold(None::<CMatrix>, |acc, m| Some(match acc {
            None => m.clone(),
            Some(a) => kron(&a, m),
        }))
        .expect("n_atoms >= 1")
}

fn rydberg_projector() -> CMatrix {
    CMatrix::from_real_diag(&[0.0, 0.0, 1.0])
}

/// Number of Rydberg excitations of every basis state.
pub fn rydberg_count(n_atoms: usize) -> Vec<f64> {
    (0..register_dim(n_atoms))
        .map(|i| BasisIndex::from_index(i, n_atoms).count(Level::Rydberg) as f64)
        .collect()
}

/// Full register Hamiltonian at finite blockade.
pub fn h_full(sys: &AtomSystem, cv: ControlValue) -> Result<CMatrix> {
    let b = match sys.blockade {
        Blockade::Finite(b) => b,
        Blockade::Infinite => {
            return Err(Error::InvalidArgument(
                "h_full needs a finite blockade strength; use the projected models for B -> inf"
                    .into(),
            ))
        }
    };
    if !sys.equidistant {
        return Err(Error::Unsupported("only equidistant registers are modelled".into()));
    }
    let n = sys.n_atoms;
    let single = h_single(cv);
    let mut h = CMatrix::zeros(sys.dim());
    for i in 0..n {
        h = &h + &embed(&single, i, n);
    }
    let v = C64::new(b * sys.omega_max, 0.0);
    let nr = rydberg_projector();
    for i in 0..n {
        for j in i + 1..n {
            let pair = embed(&nr, i, n).matmul(&embed(&nr, j, n));
            h = &h + &pair.scale(v);
        }
    }
    Ok(h)
}

/// Non-interacting Hamiltonian with every state carrying two or more Rydberg
/// excitations projected out (its rows and columns are zero).
pub fn h_blockade_projected(n_atoms: usize, cv: ControlValue) -> CMatrix {
    let single = h_single(cv);
    let mut h = CMatrix::zeros(register_dim(n_atoms));
    for i in 0..n_atoms {
        h = &h + &embed(&single, i, n_atoms);
    }
    project_single_excitation(&h, n_atoms)
}

fn project_single_excitation(h: &CMatrix, n_atoms: usize) -> CMatrix {
    let counts = rydberg_count(n_atoms);
    let mut out = h.clone();
    let d = out.dim();
    for i in 0..d {
        for j in 0..d {
            if counts[i] > 1.0 || counts[j] > 1.0 {
                out[(i, j)] = ZERO;
            }
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Sum over the distinct operators obtained by permuting the atom labels of
/// `op` (the same relabelling applied to kets and bras).
pub fn permutation_sum(op: &CMatrix, n_atoms: usize) -> CMatrix {
    let d = register_dim(n_atoms);
    assert_eq!(op.dim(), d, "operator does not act on an {n_atoms}-atom register");
    let relabel = |perm: &[usize], idx: usize| -> usize {
        let src = BasisIndex::from_index(idx, n_atoms);
        let mut digits = vec![Level::Zero; n_atoms];
        for (i, &lvl) in src.digits().iter().enumerate() {
            digits[perm[i]] = lvl;
        }
        BasisIndex::new(digits).index()
    };
    let mut distinct: Vec<CMatrix> = Vec::new();
    for perm in permutations(n_atoms) {
        let map: Vec<usize> = (0..d).map(|i| relabel(&perm, i)).collect();
        let mut conj = CMatrix::zeros(d);
        for a in 0..d {
            for b in 0..d {
                conj[(map[a], map[b])] = op[(a, b)];
            }
        }
        if !distinct.iter().any(|m| *m == conj) {
            distinct.push(conj);
        }
    }
    distinct.iter().fold(CMatrix::zeros(d), |acc, m| &acc + m)
}

fn ket(label: &str) -> Vec<C64> {
    let b = BasisIndex::parse(label).expect("valid basis label");
    let mut v = vec![ZERO; register_dim(b.n_atoms())];
    v[b.index()] = ONE;
    v
}

fn superpose(labels: &[&str]) -> Vec<C64> {
    let norm = (labels.len() as f64).sqrt().recip();
    let mut v = ket(labels[0]).iter().map(|&x| x * norm).collect::<Vec<_>>();
    for l in &labels[1..] {
        for (o, x) in v.iter_mut().zip(ket(l)) {
            *o += x * norm;
        }
    }
    v
}

/// Three-atom Hamiltonian in the perfect-blockade limit, assembled from the
/// bright-state couplings of each excitation manifold.
pub fn h_effective_3q(cv: ControlValue) -> CMatrix {
    let n = 3;
    let omega = cv.omega;
    let single = CMatrix::outer(&ket("001"), &ket("00r"));
    let pair = CMatrix::outer(&ket("011"), &superpose(&["01r", "0r1"]));
    let triple = CMatrix::outer(&ket("111"), bright_state(3).expect("n = 3").amplitudes());

    let coupling = &(&permutation_sum(&single, n).scale_real(omega / 2.0)
        + &permutation_sum(&pair, n).scale_real(2f64.sqrt() * omega / 2.0))
        + &triple.scale_real(3f64.sqrt() * omega / 2.0);
    let mut h = &coupling + &coupling.adjoint();

    // One representative per multiset {i, j}; the permutation sum covers the
    // orderings.
    for label in ["00r", "01r", "11r"] {
        let proj = CMatrix::outer(&ket(label), &ket(label));
        h = &h - &permutation_sum(&proj, n).scale_real(cv.delta);
    }
    h
}

/// Adds the non-Hermitian loss term `−i(Γ/2)·Σᵢ |r⟩⟨r|ᵢ`.
pub fn add_decay(h: &CMatrix, sys: &AtomSystem) -> CMatrix {
    if sys.gamma == 0.0 {
        return h.clone();
    }
    let counts = rydberg_count(sys.n_atoms);
    assert_eq!(h.dim(), counts.len(), "decay term on a mismatched register");
    let mut out = h.clone();
    for (i, &c) in counts.iter().enumerate() {
        out[(i, i)] -= I * (sys.gamma / 2.0 * c);
    }
    out
}

/// Symmetric single-excitation state `(|r1…1⟩ + |1r…1⟩ + …)/√n`.
pub fn bright_state(n_atoms: usize) -> Result<StateVector> {
    let labels: Vec<String> = match n_atoms {
        2 | 3 => (0..n_atoms)
            .map(|k| (0..n_atoms).map(|i| if i == k { 'r' } else { '1' }).collect())
            .collect(),
        _ => {
            return Err(Error::Unsupported(format!(
                "bright states are defined for 2 or 3 atoms, got {n_atoms}"
            )))
        }
    };
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    Ok(StateVector::new(superpose(&refs)))
}

/// Hamiltonian affine in the detuning: `H(Δ) = drift + Δ·generator`, with the
/// Rabi frequency held at `Ω_max`.
#[derive(Clone, Debug)]
pub struct ControlModel {
    n_atoms: usize,
    drift: CMatrix,
    generator: CMatrix,
    rydberg: Vec<f64>,
}

impl ControlModel {
    pub fn for_system(sys: &AtomSystem) -> Result<Self> {
        sys.validate()?;
        let n = sys.n_atoms;
        let at_rest = ControlValue::new(sys.omega_max, 0.0);
        let counts = rydberg_count(n);
        let (drift, generator) = match sys.blockade {
            Blockade::Finite(_) => {
                let drift = add_decay(&h_full(sys, at_rest)?, sys);
                let gen: Vec<f64> = counts.iter().map(|&c| -c).collect();
                (drift, CMatrix::from_real_diag(&gen))
            }
            Blockade::Infinite => {
                let base = if n == 3 { h_effective_3q(at_rest) } else { h_blockade_projected(n, at_rest) };
                let drift = project_single_excitation(&add_decay(&base, sys), n);
                let gen: Vec<f64> = counts.iter().map(|&c| if c == 1.0 { -1.0 } else { 0.0 }).collect();
                (drift, CMatrix::from_real_diag(&gen))
            }
        };
        Ok(Self { n_atoms: n, drift, generator, rydberg: counts })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    pub fn drift(&self) -> &CMatrix {
        &self.drift
    }

    /// `∂H/∂Δ`.
    pub fn generator(&self) -> &CMatrix {
        &self.generator
    }

    /// Rydberg-excitation count per basis state.
    pub fn rydberg_count(&self) -> &[f64] {
        &self.rydberg
    }

    pub fn hamiltonian(&self, delta: f64) -> CMatrix {
        &self.drift + &self.generator.scale_real(delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::expm;

    fn idx(label: &str) -> usize {
        BasisIndex::parse(label).unwrap().index()
    }

    #[test]
    fn single_atom_hamiltonian_entries() {
        let h = h_single(ControlValue::new(1.0, 0.0));
        let mut expected = CMatrix::zeros(3);
        expected[(1, 2)] = C64::new(0.5, 0.0);
        expected[(2, 1)] = C64::new(0.5, 0.0);
        assert_eq!(h, expected);
        assert_eq!(h_single(ControlValue::new(0.0, 1.0)), CMatrix::from_real_diag(&[0.0, 0.0, -1.0]));
    }

    #[test]
    fn single_atom_eigenvalues_follow_two_level_formula() {
        // The {|1>,|r>} block [[0, 1/2], [1/2, -0.3]] has eigenvalues
        // -0.15 ± sqrt(0.25 + 0.0225); recover them from tr and det of the
        // computed block rather than trusting the closed form twice.
        let h = h_single(ControlValue::new(1.0, 0.3));
        let tr = h[(1, 1)] + h[(2, 2)];
        let det = h[(1, 1)] * h[(2, 2)] - h[(1, 2)] * h[(2, 1)];
        let disc = (tr * tr - det * 4.0).sqrt();
        let (l1, l2) = ((tr + disc) / 2.0, (tr - disc) / 2.0);
        let r = (0.25f64 + 0.0225).sqrt();
        assert!((l1.re - (-0.15 + r)).abs() < 1e-14 && l1.im.abs() < 1e-14);
        assert!((l2.re - (-0.15 - r)).abs() < 1e-14);
        assert_eq!(h[(0, 0)], ZERO);
    }

    #[test]
    fn full_hamiltonian_interaction_only() {
        let sys = AtomSystem::new(2, Blockade::Finite(21.1), 0.0).unwrap();
        let h = h_full(&sys, ControlValue::new(0.0, 0.0)).unwrap();
        let rr = idx("rr");
        for i in 0..9 {
            for j in 0..9 {
                let expected = if i == rr && j == rr { 21.1 } else { 0.0 };
                assert_eq!(h[(i, j)], C64::new(expected, 0.0));
            }
        }
    }

    #[test]
    fn full_hamiltonian_bright_couplings() {
        let sys2 = AtomSystem::new(2, Blockade::Finite(1e6), 0.0).unwrap();
        let h = h_full(&sys2, ControlValue::new(1.0, 0.0)).unwrap();
        let b2 = bright_state(2).unwrap();
        let c = StateVector::basis(9, idx("11")).inner(&b2.apply(&h));
        assert!((c - C64::new(2f64.sqrt() / 2.0, 0.0)).norm() < 1e-14);

        let sys3 = AtomSystem::new(3, Blockade::Finite(21.1), 0.0).unwrap();
        let h = h_full(&sys3, ControlValue::new(1.0, 0.0)).unwrap();
        let b3 = bright_state(3).unwrap();
        let c = StateVector::basis(27, idx("111")).inner(&b3.apply(&h));
        assert!((c - C64::new(3f64.sqrt() / 2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn full_hamiltonian_is_hermitian() {
        for n in 1..=4 {
            let sys = AtomSystem::new(n, Blockade::Finite(21.1), 0.0).unwrap();
            for &(o, d) in &[(1.0, 0.0), (1.0, -2.3), (0.4, 1.7)] {
                let h = h_full(&sys, ControlValue::new(o, d)).unwrap();
                assert!((&h - &h.adjoint()).max_abs() < 1e-14);
            }
        }
    }

    #[test]
    fn full_hamiltonian_rejects_unsupported_geometry() {
        let mut sys = AtomSystem::new(2, Blockade::Finite(21.1), 0.0).unwrap();
        sys.equidistant = false;
        assert!(matches!(h_full(&sys, ControlValue::new(1.0, 0.0)), Err(Error::Unsupported(_))));
        let inf = AtomSystem::new(2, Blockade::Infinite, 0.0).unwrap();
        assert!(h_full(&inf, ControlValue::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn effective_hamiltonian_entries() {
        let cv = ControlValue::new(1.0, 0.7);
        let h = h_effective_3q(cv);
        let b3 = bright_state(3).unwrap();
        let c = StateVector::basis(27, idx("111")).inner(&b3.apply(&h));
        assert!((c - C64::new(3f64.sqrt() / 2.0, 0.0)).norm() < 1e-14);
        let rr1 = idx("rr1");
        assert!((0..27).all(|i| h[(i, rr1)] == ZERO && h[(rr1, i)] == ZERO));
        assert_eq!(h[(idx("01r"), idx("01r"))], C64::new(-0.7, 0.0));
        assert_eq!(h[(idx("r00"), idx("r00"))], C64::new(-0.7, 0.0));
        assert!(h.is_hermitian(0.0));
    }

    #[test]
    fn effective_hamiltonian_matches_projected_full_model() {
        for &(o, d) in &[(1.0, 0.0), (1.0, 1.3), (0.3, -2.0)] {
            let cv = ControlValue::new(o, d);
            let a = h_effective_3q(cv);
            let b = h_blockade_projected(3, cv);
            assert!((&a - &b).max_abs() < 1e-15);
        }
    }

    #[test]
    fn large_blockade_converges_to_projected_model() {
        let cv = ControlValue::new(1.0, 0.4);
        let counts = rydberg_count(3);
        let eff = h_effective_3q(cv);
        let mut prev = f64::INFINITY;
        for b in [10.0, 100.0, 1000.0] {
            let sys = AtomSystem::new(3, Blockade::Finite(b), 0.0).unwrap();
            let full = h_full(&sys, cv).unwrap();
            let mut gap: f64 = 0.0;
            for i in 0..27 {
                for j in 0..27 {
                    if counts[i] > 1.0 || counts[j] > 1.0 {
                        continue;
                    }
                    gap = gap.max((full[(i, j)] - eff[(i, j)]).norm());
                }
            }
            assert!(gap <= prev);
            prev = gap;
        }
        assert!(prev < 1e-14);
    }

    #[test]
    fn blockade_subspaces_do_not_mix() {
        // Under the projected model the computational state |011> only ever
        // couples to its own bright partner; every transition amplitude to a
        // different manifold is exactly zero.
        let h = h_effective_3q(ControlValue::new(1.0, 0.9));
        let u = expm(&h.scale(C64::new(0.0, -2.7)));
        let manifold = |i: usize| -> Vec<usize> {
            // Atoms in |0> are spectators; the manifold is labelled by them.
            BasisIndex::from_index(i, 3)
                .digits()
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == Level::Zero)
                .map(|(k, _)| k)
                .collect()
        };
        let counts = rydberg_count(3);
        for i in 0..27 {
            for j in 0..27 {
                if counts[i] > 1.0 || counts[j] > 1.0 {
                    continue;
                }
                if manifold(i) != manifold(j) {
                    assert_eq!(u[(i, j)], ZERO, "{i} -> {j}");
                }
            }
        }
    }

    #[test]
    fn decay_term_and_lifetime() {
        let sys = AtomSystem::new(2, Blockade::Finite(21.1), 0.0).unwrap();
        let h = h_full(&sys, ControlValue::new(1.0, 0.2)).unwrap();
        assert_eq!(add_decay(&h, &sys), h);

        let lossy = sys.with_gamma(0.01);
        let hd = add_decay(&h, &lossy);
        assert!(!hd.is_hermitian(1e-12));
        assert_eq!(hd[(idx("11"), idx("11"))], h[(idx("11"), idx("11"))]);

        let gamma = 1.0 / 6063.0;
        let one = AtomSystem::new(1, Blockade::Finite(21.1), gamma).unwrap();
        let h1 = add_decay(&h_single(ControlValue::new(0.0, 0.0)), &one);
        let u = expm(&h1.scale(C64::new(0.0, -6063.0)));
        let pop = u[(2, 2)].norm_sqr();
        assert!((pop - (-1f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn bright_states() {
        let b2 = bright_state(2).unwrap();
        assert!((b2.norm_sqr() - 1.0).abs() < 1e-15);
        let s = 0.5f64.sqrt();
        assert!((b2.amplitudes()[idx("1r")].re - s).abs() < 1e-15);
        assert!((b2.amplitudes()[idx("r1")].re - s).abs() < 1e-15);
        let b3 = bright_state(3).unwrap();
        for l in ["11r", "1r1", "r11"] {
            assert!((b3.amplitudes()[idx(l)].re - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        }
        assert!((b3.norm_sqr() - 1.0).abs() < 1e-15);
        assert!(bright_state(4).is_err());
    }

    #[test]
    fn permutation_sum_counts_distinct_terms() {
        let op = CMatrix::outer(&ket("001"), &ket("00r"));
        let s = permutation_sum(&op, 3);
        let nnz = s.as_slice().iter().filter(|&&x| x != ZERO).count();
        assert_eq!(nnz, 3);
        assert_eq!(s[(idx("100"), idx("r00"))], ONE);
    }

    #[test]
    fn control_model_is_affine_in_detuning() {
        for blockade in [Blockade::Finite(21.1), Blockade::Infinite] {
            for n in [2, 3] {
                let sys = AtomSystem::new(n, blockade, 0.0).unwrap();
                let model = ControlModel::for_system(&sys).unwrap();
                for d in [-1.5, 0.0, 2.2] {
                    let expected = match blockade {
                        Blockade::Finite(_) => h_full(&sys, ControlValue::new(1.0, d)).unwrap(),
                        Blockade::Infinite if n == 3 => h_effective_3q(ControlValue::new(1.0, d)),
                        Blockade::Infinite => h_blockade_projected(n, ControlValue::new(1.0, d)),
                    };
                    assert!((&model.hamiltonian(d) - &expected).max_abs() < 1e-15);
                }
            }
        }
    }
}
