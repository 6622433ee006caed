//! Radial low-pass filtering with optional reflection padding.

use rustfft::num_complex::Complex;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use super::fft::{signed_freq, Plan2};
use crate::error::{Error, Result};
use crate::grid::GridSeries;
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taper {
    BrickWall,
    /// Cosine roll-off over the top `width` fraction of the cutoff radius.
    RaisedCosine { width: f64 },
}

/// Cutoff is a fraction of the Nyquist frequency, measured radially in
/// per-axis normalised frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowpassSpec {
    pub cutoff: f64,
    pub taper: Taper,
    /// Reflection padding in cells on every side.
    pub pad: usize,
}

impl Default for LowpassSpec {
    fn default() -> Self {
        LowpassSpec { cutoff: 0.25, taper: Taper::RaisedCosine { width: 0.2 }, pad: 8 }
    }
}

impl LowpassSpec {
    pub fn brick_wall(cutoff: f64, pad: usize) -> Self {
        LowpassSpec { cutoff, taper: Taper::BrickWall, pad }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff > 0.0 && self.cutoff <= 1.0) {
            return Err(Error::InvalidConfig(format!("cutoff {} outside (0, 1]", self.cutoff)));
        }
        if let Taper::RaisedCosine { width } = self.taper {
            if !(0.0..=1.0).contains(&width) {
                return Err(Error::InvalidConfig(format!("taper width {width} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Mask gain at radius `rho` (fraction of Nyquist). A brick wall at
    /// cutoff 1 passes the whole band, corners included.
    pub fn gain(&self, rho: f64) -> f64 {
        let c = self.cutoff;
        match self.taper {
            Taper::BrickWall => f64::from(u8::from(rho <= c || c >= 1.0)),
            Taper::RaisedCosine { width } => {
                let edge = c * (1.0 - width);
                if rho <= edge {
                    1.0
                } else if rho >= c {
                    0.0
                } else {
                    0.5 * (1.0 + (std::f64::consts::PI * (rho - edge) / (c - edge)).cos())
                }
            }
        }
    }
}

/// Precomputed plan and mask for one field shape.
pub struct Lowpass<T: Real> {
    spec: LowpassSpec,
    nrows: usize,
    ncols: usize,
    prows: usize,
    pcols: usize,
    plan: Plan2<T>,
    mask: Vec<T>,
}

/// Mirror index without repeating the edge: -1 -> 1, n -> n - 2.
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut k = i.rem_euclid(period);
    if k >= n as isize {
        k = period - k;
    }
    k as usize
}

impl<T: Real> Lowpass<T> {
    pub fn new(nrows: usize, ncols: usize, spec: LowpassSpec) -> Result<Self> {
        spec.validate()?;
        let (prows, pcols) = (nrows + 2 * spec.pad, ncols + 2 * spec.pad);
        if nrows == 0 || ncols == 0 || prows % 2 != 0 || pcols % 2 != 0 {
            return Err(Error::BadDimensions(format!(
                "{nrows}x{ncols} with padding {} gives {prows}x{pcols}; both must be even",
                spec.pad
            )));
        }
        let mut mask = Vec::with_capacity(prows * pcols);
        for ky in 0..prows {
            let fy = signed_freq(ky, prows) as f64 / (prows / 2) as f64;
            for kx in 0..pcols {
                let fx = signed_freq(kx, pcols) as f64 / (pcols / 2) as f64;
                mask.push(T::lit(spec.gain((fy * fy + fx * fx).sqrt())));
            }
        }
        Ok(Lowpass { spec, nrows, ncols, prows, pcols, plan: Plan2::new(prows, pcols), mask })
    }

    pub fn spec(&self) -> &LowpassSpec {
        &self.spec
    }

    pub fn apply(&self, field: &[T]) -> Result<Vec<T>> {
        if field.len() != self.nrows * self.ncols {
            return Err(Error::BadDimensions(format!(
                "{} values for a {}x{} filter",
                field.len(),
                self.nrows,
                self.ncols
            )));
        }
        let p = self.spec.pad as isize;
        let mut buf = Vec::with_capacity(self.prows * self.pcols);
        for i in 0..self.prows {
            let si = reflect(i as isize - p, self.nrows);
            for j in 0..self.pcols {
                let sj = reflect(j as isize - p, self.ncols);
                buf.push(Complex::new(field[si * self.ncols + sj], T::zero()));
            }
        }
        self.plan.process(&mut buf, FftDirection::Forward);
        for (c, &m) in buf.iter_mut().zip(&self.mask) {
            *c = *c * m;
        }
        self.plan.process(&mut buf, FftDirection::Inverse);
        let pad = self.spec.pad;
        let mut out = Vec::with_capacity(field.len());
        for i in 0..self.nrows {
            let row = (i + pad) * self.pcols + pad;
            out.extend(buf[row..row + self.ncols].iter().map(|c| c.re));
        }
        Ok(out)
    }
}

/// One-off filter of a row-major `nrows` x `ncols` field.
pub fn lowpass<T: Real>(field: &[T], nrows: usize, ncols: usize, spec: LowpassSpec) -> Result<Vec<T>> {
    Lowpass::new(nrows, ncols, spec)?.apply(field)
}

/// Filters every step. Masked cells are filtered like any other and then
/// zeroed. The result may leave the field's physical range (Gibbs
/// undershoot), so it is built with [`GridSeries::derived`].
pub fn lowpass_series(series: &GridSeries, spec: LowpassSpec) -> Result<GridSeries> {
    let filter = Lowpass::<f64>::new(series.nlat(), series.nlon(), spec)?;
    let geo = series.geometry();
    let steps = series
        .steps()
        .iter()
        .map(|s| {
            let mut out = filter.apply(s)?;
            for (c, v) in out.iter_mut().enumerate() {
                if !geo.is_valid(c) {
                    *v = 0.0;
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    GridSeries::derived(geo.clone(), series.t0(), steps)
}
