//! Pointwise encode/decode of whole series.

use crate::error::{Error, Result};
use crate::grid::{FieldKind, GridSeries};
use crate::netcore::PpModel;
use crate::num::Real;

fn expect_kind(series: &GridSeries, kind: FieldKind) -> Result<()> {
    if series.kind() != kind {
        return Err(Error::KindMismatch { expected: kind.name(), found: series.kind().name() });
    }
    Ok(())
}

/// Applies `f` to the valid cells of every step; masked cells are written as 0.
fn map_valid(series: &GridSeries, mut f: impl FnMut(&[f64], &[usize]) -> Vec<f64>) -> Vec<Vec<f64>> {
    let geo = series.geometry();
    let cells: Vec<usize> = (0..geo.ncells()).filter(|&c| geo.is_valid(c)).collect();
    series
        .steps()
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let mut out = vec![0.0; geo.ncells()];
            for (&c, v) in cells.iter().zip(f(series.step(i), &cells)) {
                out[c] = v;
            }
            out
        })
        .collect()
}

/// PP series from aligned TP and VIMD series.
pub fn encode<T: Real>(model: &PpModel<T>, tp: &GridSeries, vimd: &GridSeries) -> Result<GridSeries> {
    expect_kind(tp, FieldKind::Tp)?;
    expect_kind(vimd, FieldKind::Vimd)?;
    if !tp.aligned_with(vimd) || tp.geometry().mask() != vimd.geometry().mask() {
        return Err(Error::GeometryMismatch("TP and VIMD series are not aligned".into()));
    }
    let mut step = 0;
    let steps = map_valid(tp, |t, cells| {
        let v = vimd.step(step);
        step += 1;
        let tv: Vec<f64> = cells.iter().map(|&c| t[c]).collect();
        let vv: Vec<f64> = cells.iter().map(|&c| v[c]).collect();
        model.encode_points(&tv, &vv)
    });
    GridSeries::new(tp.geometry().with_kind(FieldKind::Pp), tp.t0(), steps)
}

/// TP series (never negative) from a PP series.
pub fn decode<T: Real>(model: &PpModel<T>, pp: &GridSeries) -> Result<GridSeries> {
    expect_kind(pp, FieldKind::Pp)?;
    let steps = map_valid(pp, |p, cells| {
        let pv: Vec<f64> = cells.iter().map(|&c| p[c]).collect();
        model.decode_points(&pv)
    });
    GridSeries::new(pp.geometry().with_kind(FieldKind::Tp), pp.t0(), steps)
}
