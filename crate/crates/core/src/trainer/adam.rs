// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub hyper: AdamHyper,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { hyper: AdamHyper::default(), m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Updates the moments with `grad` and returns the parameter increment.
    pub fn step(&mut self, grad: &[f64], lr: f64) -> Vec<f64> {
        assert_eq!(grad.len(), self.m.len(), "gradient length changed");
        let AdamHyper { beta1, beta2, eps } = self.hyper;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        let mut delta = Vec::with_capacity(grad.len());
        for ((m, v), &g) in self.m.iter_mut().zip(self.v.iter_mut()).zip(grad) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            delta.push(-lr * (*m / c1) / ((*v / c2).sqrt() + eps));
        }
        delta
    }

    /// Little-endian `t`, `β₁`, `β₂`, `ε`, length, then both moment arrays.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + 16 * self.m.len());
        out.extend_from_slice(&self.t.to_le_bytes());
        for v in [self.hyper.beta1, self.hyper.beta2, self.hyper.eps] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.m.len() as u64).to_le_bytes());
        for v in self.m.iter().chain(&self.v) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let word = |i: usize| -> Result<[u8; 8]> {
            buf.get(8 * i..8 * i + 8)
                .map(|s| s.try_into().expect("8 bytes"))
                .ok_or_else(|| Error::Format("truncated optimizer state".into()))
        };
        let t = u64::from_le_bytes(word(0)?);
        let f = |i| word(i).map(f64::from_le_bytes);
        let hyper = AdamHyper { beta1: f(1)?, beta2: f(2)?, eps: f(3)? };
        let n = u64::from_le_bytes(word(4)?) as usize;
        if buf.len() != 8 * (5 + 2 * n) {
            return Err(Error::Format("optimizer state has the wrong length".into()));
        }
        let m = (0..n).map(|i| f(5 + i)).collect::<Result<_>>()?;
        let v = (0..n).map(|i| f(5 + n + i)).collect::<Result<_>>()?;
        Ok(Self { hyper, m, v, t })
    }
}
