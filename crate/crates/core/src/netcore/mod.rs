//! Small dense networks with exact reverse-mode gradients.
//!
//! Activations are batch-major (`rows` samples by `cols` features). All
//! reductions run in a fixed order so results are bit-reproducible.

mod adam;
mod model;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use model::{load_model, save_model, Normalization, PpModel, PPM_MAGIC};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Single-column matrix.
    pub fn column(data: Vec<T>) -> Self {
        Matrix { rows: data.len(), cols: 1, data }
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Identity => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Identity),
            _ => None,
        }
    }

    /// Tanh on every hidden layer, identity on the output layer.
    pub fn hidden_tanh(n_layers: usize) -> Vec<Activation> {
        (0..n_layers)
            .map(|i| if i + 1 == n_layers { Activation::Identity } else { Activation::Tanh })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<T> {
    /// `out` x `in`, row-major.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
    pub inputs: usize,
    pub outputs: usize,
}

impl<T: Real> DenseLayer<T> {
    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    layers: Vec<DenseLayer<T>>,
}

/// Post-activation outputs of every layer, plus the input (index 0).
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    activations: Vec<Matrix<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGrad<T>>,
    /// Gradient with respect to the network input.
    pub input: Matrix<T>,
}

impl<T: Real> Gradients<T> {
    /// Parameter gradients in [`Mlp::params`] order.
    pub fn flat(&self) -> Vec<T> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_mlp<T: Real>(widths: &[usize], activations: &[Activation], seed: u64) -> Result<Mlp<T>> {
    if widths.len() < 2 || widths.contains(&0) {
        return Err(Error::BadWidths(widths.to_vec()));
    }
    if activations.len() != widths.len() - 1 {
        return Err(Error::ShapeMismatch(format!(
            "{} activations for {} layers",
            activations.len(),
            widths.len() - 1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = widths
        .windows(2)
        .zip(activations)
        .map(|(w, &activation)| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            DenseLayer {
                weights: (0..fan_in * fan_out).map(|_| T::lit(rng.random_range(-limit..limit))).collect(),
                bias: vec![T::zero(); fan_out],
                activation,
                inputs: fan_in,
                outputs: fan_out,
            }
        })
        .collect();
    Ok(Mlp { layers })
}

impl<T: Real> Mlp<T> {
    pub fn from_layers(layers: Vec<DenseLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::BadWidths(vec![]));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::ShapeMismatch(format!("layer {i} parameter sizes")));
            }
        }
        if let Some(i) = layers.windows(2).position(|w| w[0].outputs != w[1].inputs) {
            return Err(Error::ShapeMismatch(format!("layer {} outputs != layer {} inputs", i, i + 1)));
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_width()).chain(self.layers.iter().map(|l| l.outputs)).collect()
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::n_params).sum()
    }

    /// All parameters, layer by layer, weights before bias.
    pub fn params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::ShapeMismatch(format!("{} params for a net of {}", params.len(), self.n_params())));
        }
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    /// Forward pass keeping what [`Mlp::backward`] needs.
    pub fn forward(&self, inputs: &Matrix<T>) -> Result<(Matrix<T>, ForwardCache<T>)> {
        if inputs.cols != self.input_width() {
            return Err(Error::ShapeMismatch(format!(
                "input width {} but network expects {}",
                inputs.cols,
                self.input_width()
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(inputs.clone());
        for layer in &self.layers {
            let next = layer_forward(layer, activations.last().unwrap());
            activations.push(next);
        }
        let out = activations.last().unwrap().clone();
        Ok((out, ForwardCache { activations }))
    }

    /// Forward pass without a cache.
    pub fn predict(&self, inputs: &Matrix<T>) -> Result<Matrix<T>> {
        if inputs.cols != self.input_width() {
            return Err(Error::ShapeMismatch(format!(
                "input width {} but network expects {}",
                inputs.cols,
                self.input_width()
            )));
        }
        let mut x = layer_forward(&self.layers[0], inputs);
        for layer in &self.layers[1..] {
            x = layer_forward(layer, &x);
        }
        Ok(x)
    }

    /// Reverse-mode gradients of `sum(out_grad * output)` with respect to
    /// every parameter and to the input.
    pub fn backward(&self, cache: &ForwardCache<T>, out_grad: &Matrix<T>) -> Result<Gradients<T>> {
        if cache.activations.len() != self.layers.len() + 1 {
            return Err(Error::ShapeMismatch("cache does not belong to this network".into()));
        }
        let out = cache.activations.last().unwrap();
        if out_grad.rows != out.rows || out_grad.cols != out.cols {
            return Err(Error::ShapeMismatch(format!(
                "output gradient {}x{} vs output {}x{}",
                out_grad.rows, out_grad.cols, out.rows, out.cols
            )));
        }
        for (layer, a) in self.layers.iter().zip(&cache.activations) {
            if a.cols != layer.inputs {
                return Err(Error::ShapeMismatch("cache does not belong to this network".into()));
            }
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = out_grad.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let x = &cache.activations[l];
            let y = &cache.activations[l + 1];
            // dL/dz from dL/dy
            if layer.activation == Activation::Tanh {
                for (g, &yv) in upstream.data.iter_mut().zip(&y.data) {
                    *g *= T::one() - yv * yv;
                }
            }
            let (gw, gb, gx) = layer_backward(layer, x, &upstream);
            grads.push(LayerGrad { weights: gw, bias: gb });
            upstream = gx;
        }
        grads.reverse();
        Ok(Gradients { layers: grads, input: upstream })
    }
}

fn layer_forward<T: Real>(layer: &DenseLayer<T>, x: &Matrix<T>) -> Matrix<T> {
    let (ni, no) = (layer.inputs, layer.outputs);
    // transposed weights: row i holds the contributions of input i
    let mut wt = vec![T::zero(); ni * no];
    for o in 0..no {
        for i in 0..ni {
            wt[i * no + o] = layer.weights[o * ni + i];
        }
    }
    let mut out = Matrix::zeros(x.rows, no);
    for (xr, yr) in x.data.chunks_exact(ni).zip(out.data.chunks_exact_mut(no)) {
        yr.copy_from_slice(&layer.bias);
        for (&xi, wrow) in xr.iter().zip(wt.chunks_exact(no)) {
            for (y, &w) in yr.iter_mut().zip(wrow) {
                *y += xi * w;
            }
        }
        if layer.activation == Activation::Tanh {
            for y in yr.iter_mut() {
                *y = y.tanh();
            }
        }
    }
    out
}

/// Returns (dW, db, dX) given dL/dz for this layer.
fn layer_backward<T: Real>(layer: &DenseLayer<T>, x: &Matrix<T>, dz: &Matrix<T>) -> (Vec<T>, Vec<T>, Matrix<T>) {
    let (ni, no) = (layer.inputs, layer.outputs);
    let mut gw = vec![T::zero(); ni * no];
    let mut gb = vec![T::zero(); no];
    let mut gx = Matrix::zeros(x.rows, ni);
    for ((xr, dr), gxr) in x.data.chunks_exact(ni).zip(dz.data.chunks_exact(no)).zip(gx.data.chunks_exact_mut(ni)) {
        for (o, &d) in dr.iter().enumerate() {
            if d == T::zero() {
                continue;
            }
            gb[o] += d;
            let wrow = &layer.weights[o * ni..(o + 1) * ni];
            let grow = &mut gw[o * ni..(o + 1) * ni];
            for ((g, &xi), (gxi, &w)) in grow.iter_mut().zip(xr).zip(gxr.iter_mut().zip(wrow)) {
                *g += d * xi;
                *gxi += d * w;
            }
        }
    }
    (gw, gb, gx)
}
