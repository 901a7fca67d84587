// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

//! Monotone cubic Hermite interpolation through uniformly spaced knots on the
//! normalized time `s ∈ [0, 1]`.
//!
//! Interior slopes are harmonic means of the neighbouring secants (zero at
//! local extrema) and end slopes equal the adjacent secant. Each segment is
//! then monotone, so the curve never leaves the range of its knots, and it is
//! C¹ in time.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    knots: Vec<f64>,
    slopes: Vec<f64>,
    /// `∂slope_k/∂knot_{k−1+m}` for `m = 0, 1, 2`.
    slope_jac: Vec<[f64; 3]>,
}

fn harmonic_slope(a: f64, b: f64) -> (f64, f64, f64) {
    if a * b <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let s = a + b;
    (2.0 * a * b / s, 2.0 * b * b / (s * s), 2.0 * a * a / (s * s))
}

impl Waveform {
    pub fn new(knots: &[f64]) -> Result<Self> {
        let k = knots.len();
        if k < 2 {
            return Err(Error::InvalidArgument(format!("waveform needs at least 2 knots, got {k}")));
        }
        if let Some(v) = knots.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("knot value {v}")));
        }
        let inv_h = (k - 1) as f64;
        let secant: Vec<f64> = knots.windows(2).map(|w| (w[1] - w[0]) * inv_h).collect();
        let mut slopes = vec![0.0; k];
        let mut slope_jac = vec![[0.0; 3]; k];
        slopes[0] = secant[0];
        slope_jac[0] = [0.0, -inv_h, inv_h];
        slopes[k - 1] = secant[k - 2];
        slope_jac[k - 1] = [-inv_h, inv_h, 0.0];
        for i in 1..k - 1 {
            let (d, da, db) = harmonic_slope(secant[i - 1], secant[i]);
            slopes[i] = d;
            // a = (y_i − y_{i−1})/h, b = (y_{i+1} − y_i)/h.
            slope_jac[i] = [-da * inv_h, (da - db) * inv_h, db * inv_h];
        }
        Ok(Self { knots: knots.to_vec(), slopes, slope_jac })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let segments = self.knots.len() - 1;
        let x = s.clamp(0.0, 1.0) * segments as f64;
        let i = (x.floor() as usize).min(segments - 1);
        (i, x - i as f64)
    }

    fn basis(u: f64) -> [f64; 4] {
        let u2 = u * u;
        let u3 = u2 * u;
        [2.0 * u3 - 3.0 * u2 + 1.0, u3 - 2.0 * u2 + u, -2.0 * u3 + 3.0 * u2, u3 - u2]
    }

    /// Value at normalized time `s`.
    pub fn value(&self, s: f64) -> f64 {
        let (i, u) = self.locate(s);
        let h = 1.0 / (self.knots.len() - 1) as f64;
        let [_, h10, h01, h11] = Self::basis(u);
        // `h00 = 1 − h01`; this form reproduces constant knots exactly.
        self.knots[i] + h01 * (self.knots[i + 1] - self.knots[i]) + h * (h10 * self.slopes[i] + h11 * self.slopes[i + 1])
    }

    /// Time derivative `dΔ/ds` at normalized time `s`.
    pub fn slope(&self, s: f64) -> f64 {
        let (i, u) = self.locate(s);
        let k = self.knots.len() - 1;
        let h = 1.0 / k as f64;
        let d00 = 6.0 * u * u - 6.0 * u;
        let d10 = 3.0 * u * u - 4.0 * u + 1.0;
        let d11 = 3.0 * u * u - 2.0 * u;
        (d00 * (self.knots[i] - self.knots[i + 1]) + d10 * h * self.slopes[i] + d11 * h * self.slopes[i + 1])
            * k as f64
    }

    /// Adds `weight · ∂value(s)/∂knot_j` to `grad[j]` for every knot.
    pub fn accumulate_knot_gradient(&self, s: f64, weight: f64, grad: &mut [f64]) {
        let k = self.knots.len();
        debug_assert_eq!(grad.len(), k);
        let (i, u) = self.locate(s);
        let h = 1.0 / (k - 1) as f64;
        let [h00, h10, h01, h11] = Self::basis(u);
        grad[i] += weight * h00;
        grad[i + 1] += weight * h01;
        for (node, coeff) in [(i, h10 * h), (i + 1, h11 * h)] {
            for (m, &d) in self.slope_jac[node].iter().enumerate() {
                let j = node + m;
                if d != 0.0 && j >= 1 && j - 1 < k {
                    grad[j - 1] += weight * coeff * d;
                }
            }
        }
    }

    /// Samples the waveform on `n + 1` uniformly spaced points of `[0, 1]`.
    pub fn sample_uniform(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|j| self.value(j as f64 / n.max(1) as f64)).collect()
    }
}
