use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSeries, STEPS_PER_DAY};

/// One-sided mean periodogram; frequencies in cycles per day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdCurve {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    pub segments: usize,
}

impl PsdCurve {
    pub fn bin_width(&self) -> f64 {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            0.0
        }
    }

    /// Integral of the density; equals the mean per-segment variance.
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.bin_width()
    }
}

/// Mean periodogram of non-overlapping, mean-removed segments of length
/// `seg_len`, averaged over `samples` (each a time series).
pub fn mean_periodogram(samples: &[Vec<f64>], seg_len: usize) -> Result<PsdCurve> {
    if seg_len < 2 || !seg_len.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!("segment length {seg_len} must be even and at least 2")));
    }
    let len = samples.iter().map(Vec::len).min().unwrap_or(0);
    if samples.is_empty() || len < seg_len {
        return Err(Error::SeriesTooShort { len, need: seg_len });
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg_len);
    let half = seg_len / 2;
    let fs = STEPS_PER_DAY as f64;
    let dt = 1.0 / fs;
    let mut power = vec![0.0; half + 1];
    let mut segments = 0usize;
    let mut buf = vec![Complex::new(0.0, 0.0); seg_len];
    for s in samples {
        for seg in s.chunks_exact(seg_len) {
            let mean = seg.iter().sum::<f64>() / seg_len as f64;
            for (b, &x) in buf.iter_mut().zip(seg) {
                *b = Complex::new(x - mean, 0.0);
            }
            fft.process(&mut buf);
            for (k, p) in power.iter_mut().enumerate() {
                let fold = if k == 0 || k == half { 1.0 } else { 2.0 };
                *p += fold * buf[k].norm_sqr() * dt / seg_len as f64;
            }
            segments += 1;
        }
    }
    power.iter_mut().for_each(|p| *p /= segments as f64);
    let freqs = (0..=half).map(|k| k as f64 * fs / seg_len as f64).collect();
    Ok(PsdCurve { freqs, power, segments })
}

/// Temporal PSD of one cell.
pub fn temporal_psd(series: &GridSeries, cell: usize, seg_len: usize) -> Result<PsdCurve> {
    temporal_psd_cells(series, &[cell], seg_len)
}

/// Temporal PSD averaged over several cells.
pub fn temporal_psd_cells(series: &GridSeries, cells: &[usize], seg_len: usize) -> Result<PsdCurve> {
    if let Some(&c) = cells.iter().find(|&&c| c >= series.ncells()) {
        return Err(Error::InvalidConfig(format!("cell {c} outside a grid of {} cells", series.ncells())));
    }
    let samples: Vec<Vec<f64>> = cells.iter().map(|&c| series.cell_series(c)).collect();
    mean_periodogram(&samples, seg_len)
}
