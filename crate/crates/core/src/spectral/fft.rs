//! Unitary 2-D discrete Fourier transform on row-major real fields.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::num::Real;

/// Complex spectrum of an `nrows` x `ncols` field, row-major, DC at index 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<T> {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<Complex<T>>,
}

impl<T: Real> Spectrum<T> {
    pub fn at(&self, ky: usize, kx: usize) -> Complex<T> {
        self.data[ky * self.ncols + kx]
    }

    /// Sum of |c|^2; equals the field's sum of squares under the unitary scaling.
    pub fn energy(&self) -> T {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Reusable row/column plans for one grid shape.
pub(crate) struct Plan2<T: Real> {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
}

impl<T: Real> Plan2<T> {
    pub(crate) fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Plan2 {
            rows,
            cols,
            row_fwd: planner.plan_fft(cols, FftDirection::Forward),
            row_inv: planner.plan_fft(cols, FftDirection::Inverse),
            col_fwd: planner.plan_fft(rows, FftDirection::Forward),
            col_inv: planner.plan_fft(rows, FftDirection::Inverse),
        }
    }

    /// In-place transform with unitary scaling `1/sqrt(rows*cols)`.
    pub(crate) fn process(&self, buf: &mut [Complex<T>], direction: FftDirection) {
        let (row, col) = match direction {
            FftDirection::Forward => (&self.row_fwd, &self.col_fwd),
            FftDirection::Inverse => (&self.row_inv, &self.col_inv),
        };
        row.process(buf);
        let mut column = vec![Complex::new(T::zero(), T::zero()); self.rows];
        for j in 0..self.cols {
            for i in 0..self.rows {
                column[i] = buf[i * self.cols + j];
            }
            col.process(&mut column);
            for i in 0..self.rows {
                buf[i * self.cols + j] = column[i];
            }
        }
        let scale = T::one() / T::from_usize_lossy(self.rows * self.cols).sqrt();
        for c in buf.iter_mut() {
            *c = *c * scale;
        }
    }

    pub(crate) fn forward_real(&self, field: &[T]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> = field.iter().map(|&x| Complex::new(x, T::zero())).collect();
        self.process(&mut buf, FftDirection::Forward);
        buf
    }

    pub(crate) fn inverse_real(&self, mut buf: Vec<Complex<T>>) -> Vec<T> {
        self.process(&mut buf, FftDirection::Inverse);
        buf.into_iter().map(|c| c.re).collect()
    }
}

fn check_even(nrows: usize, ncols: usize, len: usize) -> Result<()> {
    if nrows == 0 || ncols == 0 || !nrows.is_multiple_of(2) || !ncols.is_multiple_of(2) {
        return Err(Error::BadDimensions(format!("{nrows}x{ncols} must be non-empty and even")));
    }
    if len != nrows * ncols {
        return Err(Error::BadDimensions(format!("{len} values for a {nrows}x{ncols} field")));
    }
    Ok(())
}

/// Forward unitary transform of a real field.
pub fn fft2_real<T: Real>(field: &[T], nrows: usize, ncols: usize) -> Result<Spectrum<T>> {
    check_even(nrows, ncols, field.len())?;
    let data = Plan2::new(nrows, ncols).forward_real(field);
    Ok(Spectrum { nrows, ncols, data })
}

/// Inverse unitary transform; returns the real part.
pub fn ifft2_real<T: Real>(spectrum: &Spectrum<T>) -> Result<Vec<T>> {
    check_even(spectrum.nrows, spectrum.ncols, spectrum.data.len())?;
    Ok(Plan2::new(spectrum.nrows, spectrum.ncols).inverse_real(spectrum.data.clone()))
}

/// Signed integer frequency of FFT bin `k` on an axis of length `n`.
pub fn signed_freq(k: usize, n: usize) -> isize {
    if k <= n / 2 {
        k as isize
    } else {
        k as isize - n as isize
    }
}
