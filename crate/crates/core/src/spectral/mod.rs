//! FFT band-limiting, LR/HR pair generation and Gibbs diagnostics.

pub mod fft;
mod filter;
mod gibbs;
mod pairs;

pub use fft::{fft2_real, ifft2_real, signed_freq, Spectrum};
pub use filter::{lowpass, lowpass_series, Lowpass, LowpassSpec, Taper};
pub use gibbs::{dry_region, gibbs_metrics, GibbsReport, DRY_DILATION, NEGATIVE_EPS};
pub use pairs::{coarse_geometry, make_pairs, subsample, PairSet};
