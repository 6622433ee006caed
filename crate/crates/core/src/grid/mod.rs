//! Lat-lon raster data model shared by every stage of the pipeline.
//!
//! Layout is row-major with latitude running north to south (row 0 is the
//! northernmost) and longitude west to east. Missing cells are carried in a
//! boolean mask (`true` = valid) shared by all steps of a series; values under
//! the mask are never inspected.

mod csv;
mod ppg;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::csv::{read_grid_csv, write_grid_csv, CSV_MAX_CELLS};
pub use self::ppg::{read_derived_series, read_grid_series, write_derived_series, write_grid_series, PPG_MAGIC};

/// Accumulation interval of one step, in seconds (3 h).
pub const STEP_SECONDS: i64 = 10_800;

/// Steps per day at 3-hourly accumulation.
pub const STEPS_PER_DAY: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldKind {
    /// Total precipitation, mm accumulated per 3 h. Never negative.
    #[serde(rename = "TP")]
    Tp,
    /// Vertically integrated moisture divergence. Positive = drying.
    #[serde(rename = "VIMD")]
    Vimd,
    /// Pseudo-precipitation, dimensionless.
    #[serde(rename = "PP")]
    Pp,
}

impl FieldKind {
    pub fn code(self) -> u8 {
        match self {
            FieldKind::Tp => 0,
            FieldKind::Vimd => 1,
            FieldKind::Pp => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(FieldKind::Tp),
            1 => Some(FieldKind::Vimd),
            2 => Some(FieldKind::Pp),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Tp => "TP",
            FieldKind::Vimd => "VIMD",
            FieldKind::Pp => "PP",
        }
    }
}

impl std::fmt::Display for FieldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Coordinates, kind and validity mask shared by every step of a series.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    kind: FieldKind,
    lat: Vec<f64>,
    lon: Vec<f64>,
    mask: Vec<bool>,
}

impl Geometry {
    /// Builds a geometry with every cell valid.
    pub fn new(kind: FieldKind, lat: Vec<f64>, lon: Vec<f64>) -> Result<Self> {
        let n = lat.len() * lon.len();
        Self::with_mask(kind, lat, lon, vec![true; n])
    }

    pub fn with_mask(kind: FieldKind, lat: Vec<f64>, lon: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        check_axes(&lat, &lon)?;
        if mask.len() != lat.len() * lon.len() {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} cells, grid has {}x{}",
                mask.len(),
                lat.len(),
                lon.len()
            )));
        }
        Ok(Geometry { kind, lat, lon, mask })
    }

    /// Regular grid with `nlat`x`nlon` cells, first row at `north`, first
    /// column at `west`, spacing `resolution` degrees.
    pub fn regular(kind: FieldKind, nlat: usize, nlon: usize, north: f64, west: f64, resolution: f64) -> Result<Self> {
        let lat = (0..nlat).map(|i| north - i as f64 * resolution).collect();
        let lon = (0..nlon).map(|j| west + j as f64 * resolution).collect();
        Self::new(kind, lat, lon)
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn nlat(&self) -> usize {
        self.lat.len()
    }

    pub fn nlon(&self) -> usize {
        self.lon.len()
    }

    pub fn ncells(&self) -> usize {
        self.lat.len() * self.lon.len()
    }

    pub fn lat(&self) -> &[f64] {
        &self.lat
    }

    pub fn lon(&self) -> &[f64] {
        &self.lon
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_valid(&self, cell: usize) -> bool {
        self.mask[cell]
    }

    /// Same coordinates and mask, different kind.
    pub fn with_kind(&self, kind: FieldKind) -> Self {
        Geometry { kind, ..self.clone() }
    }

    /// True when coordinates and mask agree (kind is ignored).
    pub fn same_layout(&self, other: &Geometry) -> bool {
        self.lat == other.lat && self.lon == other.lon && self.mask == other.mask
    }
}

fn check_axes(lat: &[f64], lon: &[f64]) -> Result<()> {
    if lat.is_empty() || lon.is_empty() {
        return Err(Error::DimensionMismatch("grid must have at least one row and column".into()));
    }
    if lat.iter().chain(lon).any(|x| !x.is_finite()) {
        return Err(Error::MalformedInput("non-finite coordinate".into()));
    }
    if lat.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::MalformedInput("latitude must be strictly decreasing (north to south)".into()));
    }
    if lon.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::MalformedInput("longitude must be strictly increasing".into()));
    }
    if lon.len() > 2 {
        let d0 = lon[1] - lon[0];
        let tol = 1e-9 * d0.abs().max(1.0);
        if lon.windows(2).any(|w| ((w[1] - w[0]) - d0).abs() > tol) {
            return Err(Error::MalformedInput("longitude spacing must be uniform".into()));
        }
    }
    Ok(())
}

/// One raster of a single field.
#[derive(Clone, Debug, PartialEq)]
pub struct GeoGrid {
    pub geometry: Geometry,
    pub values: Vec<f64>,
}

impl GeoGrid {
    /// Validated constructor; enforces every raster invariant.
    pub fn new(geometry: Geometry, values: Vec<f64>) -> Result<Self> {
        let grid = GeoGrid { geometry, values };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        check_step(&self.geometry, &self.values, 0, true)
    }

    pub fn kind(&self) -> FieldKind {
        self.geometry.kind
    }

    pub fn nlat(&self) -> usize {
        self.geometry.nlat()
    }

    pub fn nlon(&self) -> usize {
        self.geometry.nlon()
    }
}

fn check_step(geometry: &Geometry, values: &[f64], step: usize, enforce_sign: bool) -> Result<()> {
    if values.len() != geometry.ncells() {
        return Err(Error::DimensionMismatch(format!(
            "step {step} has {} values, grid has {} cells",
            values.len(),
            geometry.ncells()
        )));
    }
    let check_tp = enforce_sign && geometry.kind == FieldKind::Tp;
    for (cell, (&v, &ok)) in values.iter().zip(&geometry.mask).enumerate() {
        if !ok {
            continue;
        }
        if !v.is_finite() {
            return Err(Error::NonFiniteValue { step, cell });
        }
        if check_tp && v < 0.0 {
            return Err(Error::NegativeTp { step, cell, value: v });
        }
    }
    Ok(())
}

/// Time-ordered 3-hourly steps on one geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSeries {
    geometry: Geometry,
    t0: i64,
    steps: Vec<Vec<f64>>,
}

impl GridSeries {
    /// Validated constructor: at least one step, every step sized to the
    /// geometry, unmasked values finite, TP non-negative.
    pub fn new(geometry: Geometry, t0: i64, steps: Vec<Vec<f64>>) -> Result<Self> {
        let series = GridSeries { geometry, t0, steps };
        series.validate()?;
        Ok(series)
    }

    /// Constructor for fields produced by filtering or regression, which may
    /// legitimately dip below zero even when they are TP-kind (Gibbs
    /// undershoot, unconstrained regression). Shape and finiteness are still
    /// checked; [`GridSeries::validate`] reports any sign violation.
    pub fn derived(geometry: Geometry, t0: i64, steps: Vec<Vec<f64>>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::MalformedInput("series has zero steps".into()));
        }
        for (i, s) in steps.iter().enumerate() {
            check_step(&geometry, s, i, false)?;
        }
        Ok(GridSeries { geometry, t0, steps })
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::MalformedInput("series has zero steps".into()));
        }
        for (i, s) in self.steps.iter().enumerate() {
            check_step(&self.geometry, s, i, true)?;
        }
        Ok(())
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn kind(&self) -> FieldKind {
        self.geometry.kind
    }

    pub fn nlat(&self) -> usize {
        self.geometry.nlat()
    }

    pub fn nlon(&self) -> usize {
        self.geometry.nlon()
    }

    pub fn ncells(&self) -> usize {
        self.geometry.ncells()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn t0(&self) -> i64 {
        self.t0
    }

    pub fn timestamp(&self, step: usize) -> i64 {
        self.t0 + step as i64 * STEP_SECONDS
    }

    pub fn timestamps(&self) -> Vec<i64> {
        (0..self.len()).map(|i| self.timestamp(i)).collect()
    }

    pub fn step(&self, i: usize) -> &[f64] {
        &self.steps[i]
    }

    pub fn steps(&self) -> &[Vec<f64>] {
        &self.steps
    }

    pub fn into_steps(self) -> Vec<Vec<f64>> {
        self.steps
    }

    /// Snapshot of one step as a standalone raster.
    pub fn grid(&self, i: usize) -> GeoGrid {
        GeoGrid { geometry: self.geometry.clone(), values: self.steps[i].clone() }
    }

    /// Sub-series of steps `range`, timestamps shifted accordingly.
    pub fn slice_steps(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(Error::MalformedInput(format!(
                "step range {range:?} invalid for series of {} steps",
                self.len()
            )));
        }
        Ok(GridSeries {
            geometry: self.geometry.clone(),
            t0: self.timestamp(range.start),
            steps: self.steps[range].to_vec(),
        })
    }

    /// True when both series share layout and timestamps.
    pub fn aligned_with(&self, other: &GridSeries) -> bool {
        self.geometry.same_layout(&other.geometry) && self.t0 == other.t0 && self.len() == other.len()
    }

    /// Time series of one cell.
    pub fn cell_series(&self, cell: usize) -> Vec<f64> {
        self.steps.iter().map(|s| s[cell]).collect()
    }
}

/// Inclusive coordinate interval in degrees; endpoint order is irrelevant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub a: f64,
    pub b: f64,
}

impl Span {
    pub fn new(a: f64, b: f64) -> Self {
        Span { a, b }
    }

    fn contains(&self, x: f64) -> bool {
        let (lo, hi) = if self.a <= self.b { (self.a, self.b) } else { (self.b, self.a) };
        x >= lo && x <= hi
    }
}

/// Restricts `series` to the cells whose coordinates fall inside both spans.
pub fn crop(series: &GridSeries, lat: Span, lon: Span) -> Result<GridSeries> {
    let g = &series.geometry;
    let rows: Vec<usize> = (0..g.nlat()).filter(|&i| lat.contains(g.lat[i])).collect();
    let cols: Vec<usize> = (0..g.nlon()).filter(|&j| lon.contains(g.lon[j])).collect();
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let nlon = g.nlon();
    let pick = |src: &[f64]| -> Vec<f64> {
        rows.iter().flat_map(|&i| cols.iter().map(move |&j| src[i * nlon + j])).collect()
    };
    let mask = rows.iter().flat_map(|&i| cols.iter().map(move |&j| g.mask[i * nlon + j])).collect();
    let geometry = Geometry {
        kind: g.kind,
        lat: rows.iter().map(|&i| g.lat[i]).collect(),
        lon: cols.iter().map(|&j| g.lon[j]).collect(),
        mask,
    };
    let steps = series.steps.iter().map(|s| pick(s)).collect();
    Ok(GridSeries { geometry, t0: series.t0, steps })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FieldStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Share of cells with TP > 0; `None` for other kinds.
    pub wet_fraction: Option<f64>,
}

impl std::fmt::Display for FieldStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "n={} mean={:.6} std={:.6} min={:.6} max={:.6}",
            self.count, self.mean, self.std, self.min, self.max
        )?;
        if let Some(w) = self.wet_fraction {
            write!(f, " wet={w:.6}")?;
        }
        Ok(())
    }
}

/// Summary statistics over unmasked cells of all steps (population std).
pub fn field_stats(series: &GridSeries) -> FieldStats {
    let mask = series.geometry.mask();
    let mut count = 0usize;
    let mut sum = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut wet = 0usize;
    for s in &series.steps {
        for (&v, _) in s.iter().zip(mask).filter(|(_, &ok)| ok) {
            count += 1;
            sum += v;
            min = min.min(v);
            max = max.max(v);
            if v > 0.0 {
                wet += 1;
            }
        }
    }
    let mean = sum / count as f64;
    let mut ss = 0.0;
    for s in &series.steps {
        for (&v, _) in s.iter().zip(mask).filter(|(_, &ok)| ok) {
            ss += (v - mean) * (v - mean);
        }
    }
    FieldStats {
        count,
        mean,
        std: (ss / count as f64).sqrt(),
        min,
        max,
        wet_fraction: (series.kind() == FieldKind::Tp).then(|| wet as f64 / count as f64),
    }
}
