//! The encoder/decoder pair and its PPM checkpoint.
//!
//! ```text
//! "PPM1"
//! | encoder: n:u32, widths:u32 x n, activations:u8 x (n-1)
//! | decoder: same layout
//! | tp_scale:f64 | vimd_mean:f64 | vimd_std:f64
//! | encoder layers, then decoder layers: weights (out x in, row-major) then bias, f64
//! ```
//! Little-endian throughout.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer, Matrix, Mlp};
use crate::error::{Error, Result};
use crate::num::Real;

pub const PPM_MAGIC: &[u8; 4] = b"PPM1";

/// Input normalisation frozen at training time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// Mean of positive TP in the training pool.
    pub tp_scale: f64,
    pub vimd_mean: f64,
    pub vimd_std: f64,
}

impl Normalization {
    /// `log(1 + tp / s)`.
    pub fn tp(&self, tp: f64) -> f64 {
        (tp / self.tp_scale).ln_1p()
    }

    /// Inverse of [`Normalization::tp`], clamped so the result is never negative.
    pub fn tp_inverse(&self, tpn: f64) -> f64 {
        (self.tp_scale * tpn.exp_m1()).max(0.0)
    }

    pub fn vimd(&self, v: f64) -> f64 {
        (v - self.vimd_mean) / self.vimd_std
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PpModel<T> {
    /// (TP', VIMD') -> PP
    pub encoder: Mlp<T>,
    /// PP -> TP'
    pub decoder: Mlp<T>,
    pub norm: Normalization,
}

impl<T: Real> PpModel<T> {
    pub fn new(encoder: Mlp<T>, decoder: Mlp<T>, norm: Normalization) -> Result<Self> {
        if encoder.input_width() != 2 || encoder.output_width() != 1 {
            return Err(Error::ShapeMismatch("encoder must map 2 inputs to 1 output".into()));
        }
        if decoder.input_width() != 1 || decoder.output_width() != 1 {
            return Err(Error::ShapeMismatch("decoder must map 1 input to 1 output".into()));
        }
        if !(norm.tp_scale > 0.0) || !(norm.vimd_std > 0.0) || !norm.vimd_mean.is_finite() {
            return Err(Error::InvalidConfig(format!("invalid normalisation {norm:?}")));
        }
        Ok(PpModel { encoder, decoder, norm })
    }

    /// Normalised encoder inputs for raw TP/VIMD values.
    pub fn encoder_inputs(&self, tp: &[f64], vimd: &[f64]) -> Matrix<T> {
        let data = tp
            .iter()
            .zip(vimd)
            .flat_map(|(&t, &v)| [T::lit(self.norm.tp(t)), T::lit(self.norm.vimd(v))])
            .collect();
        Matrix { rows: tp.len(), cols: 2, data }
    }

    /// PP for raw TP/VIMD point pairs.
    pub fn encode_points(&self, tp: &[f64], vimd: &[f64]) -> Vec<f64> {
        let x = self.encoder_inputs(tp, vimd);
        let y = self.encoder.predict(&x).expect("encoder width checked at construction");
        y.data.into_iter().map(Real::to_f64_lossy).collect()
    }

    /// Unclamped decoder output in normalised TP' units.
    pub fn decode_normalized(&self, pp: &[f64]) -> Vec<f64> {
        let x = Matrix::column(pp.iter().map(|&p| T::lit(p)).collect());
        let y = self.decoder.predict(&x).expect("decoder width checked at construction");
        y.data.into_iter().map(Real::to_f64_lossy).collect()
    }

    /// Raw TP (mm), never negative.
    pub fn decode_points(&self, pp: &[f64]) -> Vec<f64> {
        self.decode_normalized(pp).into_iter().map(|t| self.norm.tp_inverse(t)).collect()
    }
}

pub fn save_model<T: Real>(model: &PpModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Real>(path: impl AsRef<Path>) -> Result<PpModel<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub(crate) fn encode<T: Real>(model: &PpModel<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(PPM_MAGIC);
    for net in [&model.encoder, &model.decoder] {
        let widths = net.widths();
        out.extend_from_slice(&(widths.len() as u32).to_le_bytes());
        for w in widths {
            out.extend_from_slice(&(w as u32).to_le_bytes());
        }
        out.extend(net.activations().into_iter().map(Activation::code));
    }
    for x in [model.norm.tp_scale, model.norm.vimd_mean, model.norm.vimd_std] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for net in [&model.encoder, &model.decoder] {
        for p in net.params() {
            out.extend_from_slice(&p.to_f64_lossy().to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::MalformedCheckpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub(crate) fn decode<T: Real>(bytes: &[u8]) -> Result<PpModel<T>> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    let magic: [u8; 4] = c
        .take(4)
        .map_err(|_| Error::MalformedCheckpoint("shorter than the magic".into()))?
        .try_into()
        .unwrap();
    if &magic != PPM_MAGIC {
        return Err(Error::VersionMismatch(magic));
    }
    let mut archs = Vec::new();
    for _ in 0..2 {
        let n = c.u32()? as usize;
        if !(2..=64).contains(&n) {
            return Err(Error::MalformedCheckpoint(format!("implausible depth {n}")));
        }
        let widths = (0..n).map(|_| c.u32().map(|w| w as usize)).collect::<Result<Vec<_>>>()?;
        if widths.iter().any(|&w| w == 0 || w > 1 << 16) {
            return Err(Error::MalformedCheckpoint(format!("implausible widths {widths:?}")));
        }
        let acts = c
            .take(n - 1)?
            .iter()
            .map(|&a| Activation::from_code(a).ok_or_else(|| Error::MalformedCheckpoint(format!("activation code {a}"))))
            .collect::<Result<Vec<_>>>()?;
        archs.push((widths, acts));
    }
    let norm = Normalization { tp_scale: c.f64()?, vimd_mean: c.f64()?, vimd_std: c.f64()? };
    let mut nets = Vec::new();
    for (widths, acts) in archs {
        let mut layers = Vec::new();
        for (w, &activation) in widths.windows(2).zip(&acts) {
            let (inputs, outputs) = (w[0], w[1]);
            let mut read = |n: usize| -> Result<Vec<T>> { (0..n).map(|_| c.f64().map(T::lit)).collect() };
            let weights = read(inputs * outputs)?;
            let bias = read(outputs)?;
            layers.push(DenseLayer { weights, bias, activation, inputs, outputs });
        }
        nets.push(Mlp::from_layers(layers)?);
    }
    if c.pos != bytes.len() {
        return Err(Error::MalformedCheckpoint(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    let decoder = nets.pop().unwrap();
    let encoder = nets.pop().unwrap();
    PpModel::new(encoder, decoder, norm).map_err(|e| Error::MalformedCheckpoint(e.to_string()))
}
