//! Per-offset ridge regression super-resolver and the TP/PP route comparison.
//!
//! Each HR cell at sub-pixel offset `(a, b)` of LR cell `(I, J)` is predicted
//! from the `(2r+1)^2` LR patch centred on `(I, J)` plus a bias. LR fields are
//! reflection padded, so edge cells see mirrored neighbours.
//!
//! ```text
//! PPD1 checkpoint, little-endian:
//! "PPD1" | factor:u32 | radius:u32 | lambda:f64 | factor^2 blocks of ((2r+1)^2 + 1) f64
//! ```

mod route;

pub use route::{route_compare, RouteComparison, RouteConfig};

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Geometry, GridSeries};
use crate::spectral::PairSet;

pub const PPD_MAGIC: &[u8; 4] = b"PPD1";
/// Fewest HR samples per offset accepted for training.
pub const MIN_SAMPLES_PER_OFFSET: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RidgeConfig {
    pub radius: usize,
    pub lambda: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        RidgeConfig { radius: 2, lambda: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DsModel {
    pub factor: usize,
    pub radius: usize,
    pub lambda: f64,
    /// One coefficient vector per offset `a * factor + b`; patch weights in
    /// row-major patch order, then the bias.
    pub coefs: Vec<Vec<f64>>,
}

impl DsModel {
    pub fn n_features(&self) -> usize {
        features(self.radius)
    }
}

fn features(radius: usize) -> usize {
    (2 * radius + 1).pow(2) + 1
}

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

/// Writes the patch around LR cell `(i, j)` plus the bias into `x`.
fn patch(field: &[f64], nlat: usize, nlon: usize, i: usize, j: usize, r: usize, x: &mut [f64]) {
    let r = r as isize;
    let mut k = 0;
    for di in -r..=r {
        let row = reflect(i as isize + di, nlat) * nlon;
        for dj in -r..=r {
            x[k] = field[row + reflect(j as isize + dj, nlon)];
            k += 1;
        }
    }
    x[k] = 1.0;
}

/// Solves `(G / n + lambda I) beta = h / n` by Cholesky.
fn solve_ridge(gram: &DMatrix<f64>, rhs: &DVector<f64>, n: usize, lambda: f64, offset: usize) -> Result<Vec<f64>> {
    let d = gram.nrows();
    let a = gram / n as f64 + DMatrix::identity(d, d) * lambda;
    let b = rhs / n as f64;
    let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let chol = a.clone().cholesky().ok_or(Error::SingularSystem { offset })?;
    if chol.l().diagonal().iter().any(|&l| l * l <= 1e-13 * scale) {
        return Err(Error::SingularSystem { offset });
    }
    Ok(chol.solve(&b).iter().copied().collect())
}

/// Closed-form ridge fit of every offset on all steps of `pairs`.
pub fn train_downscaler(pairs: &PairSet, config: RidgeConfig) -> Result<DsModel> {
    let f = pairs.factor;
    let (lr, hr) = (&pairs.lr, &pairs.hr);
    if f == 0 || lr.nlat() * f != hr.nlat() || lr.nlon() * f != hr.nlon() || lr.len() != hr.len() {
        return Err(Error::GeometryMismatch(format!(
            "LR {}x{}x{} does not match HR {}x{}x{} at factor {f}",
            lr.nlat(),
            lr.nlon(),
            lr.len(),
            hr.nlat(),
            hr.nlon(),
            hr.len()
        )));
    }
    if !(config.lambda >= 0.0 && config.lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("lambda {} must be finite and non-negative", config.lambda)));
    }
    let d = features(config.radius);
    let n_off = f * f;
    let (nlat, nlon) = (lr.nlat(), lr.nlon());
    let hgeo = hr.geometry();
    let hnlon = hr.nlon();

    // Patches are shared by every offset of an LR cell, so their outer
    // products are accumulated once when all offsets are valid.
    let mut shared = vec![0.0; d * d];
    let mut shared_n = 0usize;
    let mut own = vec![vec![0.0; d * d]; n_off];
    let mut own_n = vec![0usize; n_off];
    let mut rhs = vec![vec![0.0; d]; n_off];
    let mut x = vec![0.0; d];
    let mut valid = Vec::with_capacity(n_off);
    for (lstep, hstep) in lr.steps().iter().zip(hr.steps()) {
        for i in 0..nlat {
            for j in 0..nlon {
                valid.clear();
                for a in 0..f {
                    for b in 0..f {
                        let c = (i * f + a) * hnlon + j * f + b;
                        if hgeo.is_valid(c) {
                            valid.push((a * f + b, hstep[c]));
                        }
                    }
                }
                if valid.is_empty() {
                    continue;
                }
                patch(lstep, nlat, nlon, i, j, config.radius, &mut x);
                if valid.len() == n_off {
                    accumulate_upper(&mut shared, &x);
                    shared_n += 1;
                } else {
                    for &(o, _) in &valid {
                        accumulate_upper(&mut own[o], &x);
                        own_n[o] += 1;
                    }
                }
                for &(o, y) in &valid {
                    for (h, &xv) in rhs[o].iter_mut().zip(&x) {
                        *h += xv * y;
                    }
                }
            }
        }
    }

    let mut coefs = Vec::with_capacity(n_off);
    for o in 0..n_off {
        let n = shared_n + own_n[o];
        if n < MIN_SAMPLES_PER_OFFSET {
            return Err(Error::InsufficientData(format!(
                "offset {o} has {n} samples, need {MIN_SAMPLES_PER_OFFSET}"
            )));
        }
        let mut g = DMatrix::zeros(d, d);
        for p in 0..d {
            for q in p..d {
                let v = shared[p * d + q] + own[o][p * d + q];
                g[(p, q)] = v;
                g[(q, p)] = v;
            }
        }
        coefs.push(solve_ridge(&g, &DVector::from_column_slice(&rhs[o]), n, config.lambda, o)?);
    }
    Ok(DsModel { factor: f, radius: config.radius, lambda: config.lambda, coefs })
}

fn accumulate_upper(gram: &mut [f64], x: &[f64]) {
    let d = x.len();
    for p in 0..d {
        let xp = x[p];
        let row = &mut gram[p * d..(p + 1) * d];
        for q in p..d {
            row[q] += xp * x[q];
        }
    }
}

/// HR coordinates obtained by subdividing each LR interval into `factor`
/// equal parts; the last interval's spacing is extrapolated.
pub fn refine_axis(coarse: &[f64], factor: usize) -> Vec<f64> {
    let n = coarse.len();
    let mut out = Vec::with_capacity(n * factor);
    for k in 0..n {
        let step = if k + 1 < n { coarse[k + 1] - coarse[k] } else { coarse[k] - coarse[k - 1] };
        for a in 0..factor {
            out.push(coarse[k] + step * a as f64 / factor as f64);
        }
    }
    out
}

/// HR geometry implied by an LR geometry; the mask is inherited from the
/// parent LR cell.
pub fn refined_geometry(lr: &Geometry, factor: usize) -> Result<Geometry> {
    if lr.nlat() < 2 || lr.nlon() < 2 {
        return Err(Error::GeometryMismatch("LR grid needs at least 2 cells per axis".into()));
    }
    let lat = refine_axis(lr.lat(), factor);
    let lon = refine_axis(lr.lon(), factor);
    let hnlon = lon.len();
    let mask = (0..lat.len() * hnlon).map(|c| lr.mask()[(c / hnlon / factor) * lr.nlon() + (c % hnlon) / factor]).collect();
    Geometry::with_mask(lr.kind(), lat, lon, mask)
}

/// HR series on the geometry implied by `lr`.
pub fn apply_downscaler(model: &DsModel, lr: &GridSeries) -> Result<GridSeries> {
    let geo = refined_geometry(lr.geometry(), model.factor)?;
    apply_downscaler_onto(model, lr, &geo)
}

/// HR series on a caller-supplied geometry whose shape is `factor` times the
/// LR shape (e.g. the original HR grid the pairs were cut from).
pub fn apply_downscaler_onto(model: &DsModel, lr: &GridSeries, target: &Geometry) -> Result<GridSeries> {
    let f = model.factor;
    let (nlat, nlon) = (lr.nlat(), lr.nlon());
    if target.nlat() != nlat * f || target.nlon() != nlon * f {
        return Err(Error::GeometryMismatch(format!(
            "target {}x{} is not {f}x the LR grid {nlat}x{nlon}",
            target.nlat(),
            target.nlon()
        )));
    }
    if model.coefs.len() != f * f || model.coefs.iter().any(|c| c.len() != model.n_features()) {
        return Err(Error::ShapeMismatch("downscaler coefficients do not match factor/radius".into()));
    }
    let hnlon = nlon * f;
    let mut x = vec![0.0; model.n_features()];
    let steps = lr
        .steps()
        .iter()
        .map(|s| {
            let mut out = vec![0.0; nlat * f * hnlon];
            for i in 0..nlat {
                for j in 0..nlon {
                    patch(s, nlat, nlon, i, j, model.radius, &mut x);
                    for a in 0..f {
                        for b in 0..f {
                            let c = (i * f + a) * hnlon + j * f + b;
                            if target.is_valid(c) {
                                out[c] = model.coefs[a * f + b].iter().zip(&x).map(|(w, v)| w * v).sum();
                            }
                        }
                    }
                }
            }
            out
        })
        .collect();
    GridSeries::derived(target.with_kind(lr.kind()), lr.t0(), steps)
}

/// Bilinear upsampling baseline: LR cell `I` sits on HR index `I * factor`;
/// HR cells past the last LR cell hold its value.
pub fn bilinear_upsample(lr: &GridSeries, factor: usize, target: &Geometry) -> Result<GridSeries> {
    let (nlat, nlon) = (lr.nlat(), lr.nlon());
    if factor == 0 || target.nlat() != nlat * factor || target.nlon() != nlon * factor {
        return Err(Error::GeometryMismatch("target is not factor x the LR grid".into()));
    }
    let weights = |n: usize| -> Vec<(usize, usize, f64)> {
        (0..n * factor)
            .map(|h| {
                let i = h / factor;
                let w = (h % factor) as f64 / factor as f64;
                if i + 1 < n {
                    (i, i + 1, w)
                } else {
                    (i, i, 0.0)
                }
            })
            .collect()
    };
    let (wy, wx) = (weights(nlat), weights(nlon));
    let steps = lr
        .steps()
        .iter()
        .map(|s| {
            let mut out = Vec::with_capacity(wy.len() * wx.len());
            for &(i0, i1, ty) in &wy {
                for &(j0, j1, tx) in &wx {
                    let top = s[i0 * nlon + j0] * (1.0 - tx) + s[i0 * nlon + j1] * tx;
                    let bot = s[i1 * nlon + j0] * (1.0 - tx) + s[i1 * nlon + j1] * tx;
                    out.push(top * (1.0 - ty) + bot * ty);
                }
            }
            for (c, v) in out.iter_mut().enumerate() {
                if !target.is_valid(c) {
                    *v = 0.0;
                }
            }
            out
        })
        .collect();
    GridSeries::derived(target.with_kind(lr.kind()), lr.t0(), steps)
}

pub fn save_downscaler(model: &DsModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(model)).map_err(|e| Error::io(path, e))
}

pub fn load_downscaler(path: impl AsRef<Path>) -> Result<DsModel> {
    let path = path.as_ref();
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

fn encode(model: &DsModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(PPD_MAGIC);
    out.extend_from_slice(&(model.factor as u32).to_le_bytes());
    out.extend_from_slice(&(model.radius as u32).to_le_bytes());
    out.extend_from_slice(&model.lambda.to_le_bytes());
    for c in model.coefs.iter().flatten() {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8]) -> Result<DsModel> {
    if bytes.len() < 4 {
        return Err(Error::MalformedCheckpoint("shorter than the magic".into()));
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if &magic != PPD_MAGIC {
        return Err(Error::VersionMismatch(magic));
    }
    if bytes.len() < 20 {
        return Err(Error::MalformedCheckpoint("truncated header".into()));
    }
    let factor = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let radius = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let lambda = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
    if factor == 0 || factor > 64 || radius > 64 {
        return Err(Error::MalformedCheckpoint(format!("implausible factor {factor} / radius {radius}")));
    }
    let d = features(radius);
    let body = &bytes[20..];
    if body.len() != factor * factor * d * 8 {
        return Err(Error::MalformedCheckpoint(format!(
            "{} coefficient bytes, expected {}",
            body.len(),
            factor * factor * d * 8
        )));
    }
    let vals: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let coefs = vals.chunks_exact(d).map(<[f64]>::to_vec).collect();
    Ok(DsModel { factor, radius, lambda, coefs })
}
