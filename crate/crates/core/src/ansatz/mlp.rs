// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

//! Dense feedforward network `x_n = f(W_n x_{n−1} + b_n)` with hand-written
//! reverse-mode gradients over a flat parameter vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pre-activations beyond this magnitude saturate the sigmoid; clamping keeps
/// its value strictly inside `(0, 1)` in double precision.
const SIGMOID_CLAMP: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Linear => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Sigmoid),
            2 => Some(Activation::Linear),
            _ => None,
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP)).exp()),
            Activation::Linear => z,
        }
    }

    /// Derivative from the pre-activation `z` and the output `a = f(z)`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                if z.abs() > SIGMOID_CLAMP {
                    0.0
                } else {
                    a * (1.0 - a)
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    n_in: usize,
    n_out: usize,
    /// Row-major `n_out × n_in`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(weights: Vec<f64>, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        let n_out = bias.len();
        if n_out == 0 || weights.len() % n_out != 0 || weights.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights do not form a matrix with {n_out} rows",
                weights.len()
            )));
        }
        Ok(Self { n_in: weights.len() / n_out, n_out, weights, bias, activation })
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct MlpCache {
    /// `inputs[l]` feeds layer `l`; the last entry is the network output.
    activations: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("at least the input")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].n_out != pair[1].n_in {
                return Err(Error::DimensionMismatch(format!(
                    "layer emits {} values but the next expects {}",
                    pair[0].n_out, pair[1].n_in
                )));
            }
        }
        Ok(Self { layers })
    }

    /// `n_layers` counts the input and output layers, so the network has
    /// `n_layers − 1` weight matrices and `n_layers − 2` hidden layers of
    /// `width` ReLU units. Hidden weights use He-uniform bounds; the sigmoid
    /// output layer uses Glorot-uniform bounds scaled by `output_gain`.
    pub fn random(
        input_dim: usize,
        n_layers: usize,
        width: usize,
        output_dim: usize,
        output_gain: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if n_layers < 2 || input_dim == 0 || output_dim == 0 || (n_layers > 2 && width == 0) {
            return Err(Error::InvalidArgument(format!(
                "architecture ({n_layers} layers, width {width}) with {input_dim} inputs and {output_dim} outputs"
            )));
        }
        let mut dims = vec![input_dim];
        dims.extend(std::iter::repeat(width).take(n_layers - 2));
        dims.push(output_dim);
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, d)| {
                let (n_in, n_out) = (d[0], d[1]);
                let (limit, activation) = if l == last {
                    (output_gain * (6.0 / (n_in + n_out) as f64).sqrt(), Activation::Sigmoid)
                } else {
                    ((6.0 / n_in as f64).sqrt(), Activation::Relu)
                };
                let weights = (0..n_in * n_out).map(|_| rng.gen_range(-limit..=limit)).collect();
                Layer { n_in, n_out, weights, bias: vec![0.0; n_out], activation }
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").n_out
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::n_params).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters for a network with {}",
                params.len(),
                self.n_params()
            )));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    /// Adds `step[i]` to each parameter in flat order.
    pub fn add_to_params(&mut self, step: &[f64]) {
        debug_assert_eq!(step.len(), self.n_params());
        let mut offset = 0;
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w += step[offset];
                offset += 1;
            }
        }
    }

    /// Shifts the output-layer bias so the output pre-activation at `input`
    /// equals `target`.
    pub fn set_output_preactivation(&mut self, input: &[f64], target: &[f64]) -> Result<()> {
        if target.len() != self.output_dim() {
            return Err(Error::DimensionMismatch(format!("{} targets for {} outputs", target.len(), self.output_dim())));
        }
        let cache = self.forward_cached(input);
        let last = self.layers.len() - 1;
        let z = &cache.pre[last];
        for ((b, &zo), &t) in self.layers[last].bias.iter_mut().zip(z).zip(target) {
            *b += t - zo;
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_cached(input).activations.pop().expect("output")
    }

    pub fn forward_cached(&self, input: &[f64]) -> MlpCache {
        assert_eq!(input.len(), self.input_dim(), "network input has the wrong length");
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        activations.push(input.to_vec());
        for layer in &self.layers {
            let x = activations.last().expect("input");
            let z: Vec<f64> = (0..layer.n_out)
                .map(|o| {
                    let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                    layer.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
                })
                .collect();
            let a = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre.push(z);
            activations.push(a);
        }
        MlpCache { activations, pre }
    }

    /// Accumulates `∂L/∂params` into `grad` (flat layout of [`Mlp::params`])
    /// and returns `∂L/∂input`, given `∂L/∂output`.
    pub fn backward(&self, cache: &MlpCache, d_output: &[f64], grad: &mut [f64]) -> Vec<f64> {
        assert_eq!(d_output.len(), self.output_dim());
        assert_eq!(grad.len(), self.n_params());
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut offset = 0;
        for layer in &self.layers {
            offsets.push(offset);
            offset += layer.n_params();
        }
        let mut delta_a = d_output.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let x = &cache.activations[l];
            let a = &cache.activations[l + 1];
            let z = &cache.pre[l];
            let delta_z: Vec<f64> =
                (0..layer.n_out).map(|o| delta_a[o] * layer.activation.derivative(z[o], a[o])).collect();
            let base = offsets[l];
            let (gw, gb) = grad[base..base + layer.n_params()].split_at_mut(layer.weights.len());
            let mut delta_x = vec![0.0; layer.n_in];
            for (o, &dz) in delta_z.iter().enumerate() {
                if dz == 0.0 {
                    continue;
                }
                gb[o] += dz;
                let row = o * layer.n_in..(o + 1) * layer.n_in;
                for ((g, w), (xi, dx)) in
                    gw[row.clone()].iter_mut().zip(&layer.weights[row]).zip(x.iter().zip(delta_x.iter_mut()))
                {
                    *g += dz * xi;
                    *dx += dz * w;
                }
            }
            delta_a = delta_x;
        }
        delta_a
    }
}
