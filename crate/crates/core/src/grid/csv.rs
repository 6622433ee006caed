//! Small-grid CSV exchange: header `lat,lon,value`, one row per cell in
//! row-major order, empty `value` for masked cells.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{FieldKind, GeoGrid, Geometry};
use crate::error::{Error, Result};

/// Largest grid accepted by the CSV reader and writer.
pub const CSV_MAX_CELLS: usize = 10_000;

pub fn write_grid_csv(grid: &GeoGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let g = &grid.geometry;
    if g.ncells() > CSV_MAX_CELLS {
        return Err(Error::MalformedInput(format!(
            "{} cells exceeds the CSV limit of {CSV_MAX_CELLS}",
            g.ncells()
        )));
    }
    let mut out = String::from("lat,lon,value\n");
    for (i, &lat) in g.lat().iter().enumerate() {
        for (j, &lon) in g.lon().iter().enumerate() {
            let c = i * g.nlon() + j;
            if g.is_valid(c) {
                writeln!(out, "{lat},{lon},{}", grid.values[c]).unwrap();
            } else {
                writeln!(out, "{lat},{lon},").unwrap();
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_grid_csv(path: impl AsRef<Path>, kind: FieldKind) -> Result<GeoGrid> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, kind)
}

fn parse(text: &str, kind: FieldKind) -> Result<GeoGrid> {
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some("lat,lon,value") => {}
        other => return Err(Error::MalformedInput(format!("expected header lat,lon,value, got {other:?}"))),
    }
    let mut rows: Vec<(f64, f64, Option<f64>)> = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::MalformedInput(format!("line {}: {line:?}", n + 2));
        let mut f = line.split(',');
        let lat: f64 = f.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let lon: f64 = f.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let v = f.next().ok_or_else(bad)?.trim();
        let v = if v.is_empty() { None } else { Some(v.parse::<f64>().map_err(|_| bad())?) };
        if f.next().is_some() {
            return Err(bad());
        }
        rows.push((lat, lon, v));
        if rows.len() > CSV_MAX_CELLS {
            return Err(Error::MalformedInput(format!("more than {CSV_MAX_CELLS} cells")));
        }
    }
    if rows.is_empty() {
        return Err(Error::MalformedInput("no data rows".into()));
    }
    let mut lon = Vec::new();
    for r in &rows {
        if r.0 != rows[0].0 {
            break;
        }
        lon.push(r.1);
    }
    let nlon = lon.len();
    if !rows.len().is_multiple_of(nlon) {
        return Err(Error::DimensionMismatch(format!("{} rows is not a multiple of {nlon} columns", rows.len())));
    }
    let lat: Vec<f64> = rows.chunks(nlon).map(|c| c[0].0).collect();
    for (i, chunk) in rows.chunks(nlon).enumerate() {
        for (j, r) in chunk.iter().enumerate() {
            if r.0 != lat[i] || r.1 != lon[j] {
                return Err(Error::DimensionMismatch(format!("row {} breaks the row-major lat/lon layout", i * nlon + j + 2)));
            }
        }
    }
    let mask = rows.iter().map(|r| r.2.is_some()).collect();
    let values = rows.iter().map(|r| r.2.unwrap_or(0.0)).collect();
    GeoGrid::new(Geometry::with_mask(kind, lat, lon, mask)?, values)
}
