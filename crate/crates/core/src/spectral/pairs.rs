//! Low/high resolution training pairs by band-limiting and subsampling.

use super::filter::{lowpass_series, LowpassSpec};
use crate::error::{Error, Result};
use crate::grid::{Geometry, GridSeries};

#[derive(Clone, Debug, PartialEq)]
pub struct PairSet {
    pub hr: GridSeries,
    pub lr: GridSeries,
    pub factor: usize,
}

/// Geometry of every `factor`-th row and column, starting at index 0.
pub fn coarse_geometry(geo: &Geometry, factor: usize) -> Result<Geometry> {
    if factor == 0 {
        return Err(Error::BadFactor(factor));
    }
    let (nlat, nlon) = (geo.nlat(), geo.nlon());
    let lat: Vec<f64> = geo.lat().iter().step_by(factor).copied().collect();
    let lon: Vec<f64> = geo.lon().iter().step_by(factor).copied().collect();
    let mut mask = Vec::with_capacity(lat.len() * lon.len());
    for i in (0..nlat).step_by(factor) {
        for j in (0..nlon).step_by(factor) {
            mask.push(geo.mask()[i * nlon + j]);
        }
    }
    Geometry::with_mask(geo.kind(), lat, lon, mask)
}

/// Subsamples every step at stride `factor`.
pub fn subsample(series: &GridSeries, factor: usize) -> Result<GridSeries> {
    let geo = coarse_geometry(series.geometry(), factor)?;
    let nlon = series.nlon();
    let steps = series
        .steps()
        .iter()
        .map(|s| {
            (0..series.nlat())
                .step_by(factor)
                .flat_map(|i| (0..nlon).step_by(factor).map(move |j| s[i * nlon + j]))
                .collect()
        })
        .collect();
    GridSeries::derived(geo, series.t0(), steps)
}

/// `lr = subsample(lowpass(hr), factor)` with the cutoff fixed at
/// `1 / factor` of Nyquist; `spec` supplies the taper and padding.
pub fn make_pairs(hr: &GridSeries, factor: usize, spec: LowpassSpec) -> Result<PairSet> {
    if factor == 0 || !hr.nlat().is_multiple_of(factor) || !hr.nlon().is_multiple_of(factor) {
        return Err(Error::BadFactor(factor));
    }
    let spec = LowpassSpec { cutoff: 1.0 / factor as f64, ..spec };
    let lr = subsample(&lowpass_series(hr, spec)?, factor)?;
    Ok(PairSet { hr: hr.clone(), lr, factor })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FieldKind;

    fn series(nlat: usize, nlon: usize, f: impl Fn(usize, usize) -> f64) -> GridSeries {
        let geo = Geometry::regular(FieldKind::Pp, nlat, nlon, 60.0, 0.0, 0.25).unwrap();
        let step = (0..nlat * nlon).map(|c| f(c / nlon, c % nlon)).collect();
        GridSeries::new(geo, 0, vec![step]).unwrap()
    }

    #[test]
    fn constant_field() {
        let hr = series(16, 24, |_, _| 1.5);
        let pairs = make_pairs(&hr, 4, LowpassSpec::default()).unwrap();
        assert_eq!((pairs.lr.nlat(), pairs.lr.nlon()), (4, 6));
        assert!(pairs.lr.step(0).iter().all(|v| (v - 1.5).abs() < 1e-12));
        assert_eq!(pairs.lr.geometry().lat()[1], hr.geometry().lat()[4]);
        assert_eq!(pairs.lr.timestamps(), hr.timestamps());
    }

    #[test]
    fn identity_configuration() {
        let hr = series(8, 8, |i, j| (i * 8 + j) as f64 * 0.1);
        let pairs = make_pairs(&hr, 1, LowpassSpec::brick_wall(1.0, 0)).unwrap();
        for (a, b) in pairs.lr.step(0).iter().zip(hr.step(0)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_factor() {
        let hr = series(10, 8, |_, _| 0.0);
        assert!(matches!(make_pairs(&hr, 4, LowpassSpec::default()), Err(Error::BadFactor(4))));
        assert!(matches!(make_pairs(&hr, 0, LowpassSpec::default()), Err(Error::BadFactor(0))));
    }
}
