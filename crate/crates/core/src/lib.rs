//! Pseudo-precipitation: a learned, standard-normal proxy for precipitation
//! built from total precipitation (TP) and vertically integrated moisture
//! divergence (VIMD), with the band-limiting, downscaling and evaluation
//! machinery used to compare it against raw TP.

pub mod blend;
pub mod downscale;
pub mod error;
pub mod eval;
pub mod grid;
pub mod netcore;
pub mod num;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use grid::{FieldKind, GeoGrid, Geometry, GridSeries};
pub use num::Real;

/// Double-precision network (the training default).
pub type Mlp = netcore::Mlp<f64>;
/// Double-precision encoder/decoder pair.
pub type PpModel = netcore::PpModel<f64>;
pub type AdamState = netcore::AdamState<f64>;
/// Single-precision network, e.g. for inference experiments.
pub type Mlp32 = netcore::Mlp<f32>;
pub type PpModel32 = netcore::PpModel<f32>;
pub type Spectrum = spectral::Spectrum<f64>;
