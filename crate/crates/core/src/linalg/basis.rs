// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

//! Big-endian ternary labelling of register basis states: atom 0 is the most
//! significant digit, and each digit is 0 → |0⟩, 1 → |1⟩, 2 → |r⟩.

use super::CMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Level {
    Zero,
    One,
    Rydberg,
}

impl Level {
    pub fn digit(self) -> usize {
        match self {
            Level::Zero => 0,
            Level::One => 1,
            Level::Rydberg => 2,
        }
    }

    pub fn from_digit(d: usize) -> Option<Self> {
        match d {
            0 => Some(Level::Zero),
            1 => Some(Level::One),
            2 => Some(Level::Rydberg),
            _ => None,
        }
    }
}

/// Per-atom level assignment of one basis state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BasisIndex {
    digits: Vec<Level>,
}

impl BasisIndex {
    pub fn new(digits: Vec<Level>) -> Self {
        Self { digits }
    }

    /// Parses labels such as `"01r"`.
    pub fn parse(label: &str) -> Option<Self> {
        label
            .chars()
            .map(|c| match c {
                '0' => Some(Level::Zero),
                '1' => Some(Level::One),
                'r' | 'R' | '2' => Some(Level::Rydberg),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Self::new)
    }

    pub fn from_index(index: usize, n_atoms: usize) -> Self {
        let mut digits = vec![Level::Zero; n_atoms];
        let mut rest = index;
        for slot in digits.iter_mut().rev() {
            *slot = Level::from_digit(rest % 3).expect("digit < 3");
            rest /= 3;
        }
        Self { digits }
    }

    pub fn index(&self) -> usize {
        self.digits.iter().fold(0, |acc, d| acc * 3 + d.digit())
    }

    pub fn digits(&self) -> &[Level] {
        &self.digits
    }

    pub fn n_atoms(&self) -> usize {
        self.digits.len()
    }

    pub fn count(&self, level: Level) -> usize {
        self.digits.iter().filter(|&&d| d == level).count()
    }

    pub fn is_computational(&self) -> bool {
        self.digits.iter().all(|&d| d != Level::Rydberg)
    }

    pub fn label(&self) -> String {
        self.digits
            .iter()
            .map(|d| match d {
                Level::Zero => '0',
                Level::One => '1',
                Level::Rydberg => 'r',
            })
            .collect()
    }
}

pub fn register_dim(n_atoms: usize) -> usize {
    3usize.pow(n_atoms as u32)
}

/// Indices of the `2^N` computational states, in binary order
/// (`|0…0⟩, |0…01⟩, …, |1…1⟩`).
pub fn computational_states(n_atoms: usize) -> Vec<usize> {
    (0..1usize << n_atoms)
        .map(|bits| {
            (0..n_atoms).fold(0, |acc, i| acc * 3 + ((bits >> (n_atoms - 1 - i)) & 1))
        })
        .collect()
}

/// Projector onto the computational subspace.
pub fn computational_projector(n_atoms: usize) -> CMatrix {
    assert!(n_atoms >= 1, "projector needs at least one atom");
    let dim = register_dim(n_atoms);
    let diag: Vec<f64> = (0..dim)
        .map(|i| if BasisIndex::from_index(i, n_atoms).is_computational() { 1.0 } else { 0.0 })
        .collect();
    CMatrix::from_real_diag(&diag)
}
