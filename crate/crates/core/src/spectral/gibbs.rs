//! Ringing diagnostics of a filtered field against its original.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldKind, GeoGrid};

/// Filtered values below `-NEGATIVE_EPS` count as negative.
pub const NEGATIVE_EPS: f64 = 1e-6;
/// Dilation radius (cells) around wet cells excluded from the dry region.
pub const DRY_DILATION: usize = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GibbsReport {
    /// Only defined when the original is TP.
    pub negative_cell_fraction: Option<f64>,
    pub max_overshoot_ratio: f64,
    pub dry_region_ringing_energy: f64,
}

impl GibbsReport {
    /// Cell-count-weighted mean over several reports (e.g. time steps).
    pub fn mean(reports: &[GibbsReport]) -> GibbsReport {
        if reports.is_empty() {
            return GibbsReport::default();
        }
        let n = reports.len() as f64;
        let neg: Option<Vec<f64>> = reports.iter().map(|r| r.negative_cell_fraction).collect();
        GibbsReport {
            negative_cell_fraction: neg.map(|v| v.iter().sum::<f64>() / n),
            max_overshoot_ratio: reports.iter().map(|r| r.max_overshoot_ratio).fold(0.0, f64::max),
            dry_region_ringing_energy: reports.iter().map(|r| r.dry_region_ringing_energy).sum::<f64>() / n,
        }
    }
}

/// Cells with original = 0 that lie more than [`DRY_DILATION`] cells
/// (Chebyshev distance) from any wet cell.
pub fn dry_region(original: &GeoGrid) -> Vec<bool> {
    let (nlat, nlon) = (original.nlat(), original.nlon());
    let geo = &original.geometry;
    let mut near_wet = vec![false; nlat * nlon];
    let r = DRY_DILATION as isize;
    for i in 0..nlat {
        for j in 0..nlon {
            let c = i * nlon + j;
            if !(geo.is_valid(c) && original.values[c] > 0.0) {
                continue;
            }
            for di in -r..=r {
                for dj in -r..=r {
                    let (a, b) = (i as isize + di, j as isize + dj);
                    if a >= 0 && b >= 0 && (a as usize) < nlat && (b as usize) < nlon {
                        near_wet[a as usize * nlon + b as usize] = true;
                    }
                }
            }
        }
    }
    (0..nlat * nlon).map(|c| geo.is_valid(c) && original.values[c] == 0.0 && !near_wet[c]).collect()
}

pub fn gibbs_metrics(original: &GeoGrid, filtered: &GeoGrid) -> Result<GibbsReport> {
    if !original.geometry.same_layout(&filtered.geometry) || original.values.len() != filtered.values.len() {
        return Err(Error::GeometryMismatch("original and filtered grids differ".into()));
    }
    let geo = &original.geometry;
    let valid: Vec<usize> = (0..geo.ncells()).filter(|&c| geo.is_valid(c)).collect();
    if valid.is_empty() {
        return Ok(GibbsReport::default());
    }

    let negative_cell_fraction = (original.kind() == FieldKind::Tp).then(|| {
        let (mut neg, mut n) = (0usize, 0usize);
        for &c in &valid {
            if original.values[c] >= 0.0 {
                n += 1;
                if filtered.values[c] < -NEGATIVE_EPS {
                    neg += 1;
                }
            }
        }
        if n == 0 {
            0.0
        } else {
            neg as f64 / n as f64
        }
    });

    let omax = valid.iter().map(|&c| original.values[c]).fold(f64::NEG_INFINITY, f64::max);
    let omin = valid.iter().map(|&c| original.values[c]).fold(f64::INFINITY, f64::min);
    let fmax = valid.iter().map(|&c| filtered.values[c]).fold(f64::NEG_INFINITY, f64::max);
    let range = omax - omin;
    let max_overshoot_ratio = if range > 0.0 { ((fmax - omax) / range).max(0.0) } else { 0.0 };

    let dry = dry_region(original);
    let (mut energy, mut n) = (0.0, 0usize);
    for (c, &is_dry) in dry.iter().enumerate() {
        if is_dry {
            energy += filtered.values[c] * filtered.values[c];
            n += 1;
        }
    }
    let dry_region_ringing_energy = if n == 0 { 0.0 } else { energy / n as f64 };
    Ok(GibbsReport { negative_cell_fraction, max_overshoot_ratio, dry_region_ringing_energy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Geometry;

    fn tp_grid(values: Vec<f64>, nlat: usize, nlon: usize) -> GeoGrid {
        GeoGrid::new(Geometry::regular(FieldKind::Tp, nlat, nlon, 50.0, 0.0, 1.0).unwrap(), values).unwrap()
    }

    #[test]
    fn identical_fields_score_zero() {
        let mut v = vec![0.0; 100];
        v[55] = 3.0;
        let g = tp_grid(v, 10, 10);
        let r = gibbs_metrics(&g, &g).unwrap();
        assert_eq!(r, GibbsReport { negative_cell_fraction: Some(0.0), max_overshoot_ratio: 0.0, dry_region_ringing_energy: 0.0 });
    }

    #[test]
    fn dry_region_excludes_dilated_wet_cells() {
        let mut v = vec![0.0; 100];
        v[55] = 1.0; // row 5, col 5
        let dry = dry_region(&tp_grid(v, 10, 10));
        assert_eq!(dry.iter().filter(|&&d| !d).count(), 25);
        assert!(!dry[3 * 10 + 3] && dry[2 * 10 + 3]);
    }

    #[test]
    fn counts_negatives_and_overshoot() {
        let orig = tp_grid(vec![0.0, 0.0, 2.0, 0.0], 2, 2);
        let mut filt = orig.clone();
        filt.values = vec![-0.5, 0.0, 2.5, -1e-7];
        let r = gibbs_metrics(&orig, &filt).unwrap();
        assert_eq!(r.negative_cell_fraction, Some(0.25));
        assert!((r.max_overshoot_ratio - 0.25).abs() < 1e-15);
    }

    #[test]
    fn mismatched_geometry() {
        let a = tp_grid(vec![0.0; 4], 2, 2);
        let b = tp_grid(vec![0.0; 6], 2, 3);
        assert!(matches!(gibbs_metrics(&a, &b), Err(Error::GeometryMismatch(_))));
    }
}
