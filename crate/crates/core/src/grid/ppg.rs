//! PPG binary container.
//!
//! ```text
//! "PPG1" | kind:u8 | nlat:u32 | nlon:u32 | nsteps:u32
//! | lat:f64 x nlat | lon:f64 x nlon | t0:i64 | dt:i64
//! | nsteps x (f32 x nlat*nlon) | mask bits
//! ```
//!
//! All integers and floats are little-endian. The mask is one block shared
//! by all steps, `ceil(nlat*nlon / 8)` bytes, cell `i` at bit `i % 8`
//! (least significant first) of byte `i / 8`, set = valid.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{FieldKind, Geometry, GridSeries, STEP_SECONDS};
use crate::error::{Error, Result};

pub const PPG_MAGIC: &[u8; 4] = b"PPG1";

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::MalformedHeader {
                offset: self.pos as u64,
                reason: format!("file truncated while reading {what}"),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn i64(&mut self, what: &str) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let raw = self.take(n * 8, what)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

fn header_err(offset: usize, reason: impl Into<String>) -> Error {
    Error::MalformedHeader { offset: offset as u64, reason: reason.into() }
}

/// Reads and fully validates a PPG file.
pub fn read_grid_series(path: impl AsRef<Path>) -> Result<GridSeries> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Like [`read_grid_series`] but accepts negative TP, for band-limited or
/// regressed fields stored between pipeline stages.
pub fn read_derived_series(path: impl AsRef<Path>) -> Result<GridSeries> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_with(&bytes, false)
}

pub(crate) fn decode(bytes: &[u8]) -> Result<GridSeries> {
    decode_with(bytes, true)
}

fn decode_with(bytes: &[u8], enforce_sign: bool) -> Result<GridSeries> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != PPG_MAGIC {
        return Err(header_err(0, format!("bad magic {magic:?}")));
    }
    let kind_off = r.pos;
    let code = r.take(1, "kind")?[0];
    let kind = FieldKind::from_code(code).ok_or_else(|| header_err(kind_off, format!("unknown field kind {code}")))?;
    let dims_off = r.pos;
    let nlat = r.u32("nlat")? as usize;
    let nlon = r.u32("nlon")? as usize;
    let nsteps = r.u32("nsteps")? as usize;
    if nlat == 0 || nlon == 0 {
        return Err(header_err(dims_off, "zero grid dimension"));
    }
    if nsteps == 0 {
        return Err(header_err(dims_off + 8, "zero steps"));
    }
    let ncells = nlat
        .checked_mul(nlon)
        .ok_or_else(|| header_err(dims_off, "grid dimensions overflow"))?;
    let expected = (4 + 1 + 12) as u128
        + 8 * (nlat + nlon) as u128
        + 16
        + 4 * (ncells as u128) * (nsteps as u128)
        + ncells.div_ceil(8) as u128;
    if bytes.len() as u128 != expected {
        return Err(Error::DimensionMismatch(format!(
            "header declares {nlat}x{nlon}x{nsteps} ({expected} bytes) but file has {} bytes",
            bytes.len()
        )));
    }
    let lat_off = r.pos;
    let lat = r.f64s(nlat, "lat")?;
    let lon_off = r.pos;
    let lon = r.f64s(nlon, "lon")?;
    if let Some(i) = lat.windows(2).position(|w| !(w[1] < w[0])) {
        return Err(header_err(lat_off + 8 * (i + 1), "latitude not strictly decreasing"));
    }
    if let Some(i) = lon.iter().position(|x| !x.is_finite()) {
        return Err(header_err(lon_off + 8 * i, "non-finite longitude"));
    }
    let t0 = r.i64("t0")?;
    let dt_off = r.pos;
    let dt = r.i64("dt")?;
    if dt != STEP_SECONDS {
        return Err(header_err(dt_off, format!("time step {dt} s, expected {STEP_SECONDS} s")));
    }
    let mut steps = Vec::with_capacity(nsteps);
    for _ in 0..nsteps {
        let raw = r.take(4 * ncells, "values")?;
        steps.push(
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect::<Vec<f64>>(),
        );
    }
    let bits = r.take(ncells.div_ceil(8), "mask")?;
    let mask = (0..ncells).map(|i| bits[i / 8] >> (i % 8) & 1 == 1).collect();
    let geometry = Geometry::with_mask(kind, lat, lon, mask)
        .map_err(|e| header_err(lon_off, format!("invalid coordinates: {e}")))?;
    if enforce_sign {
        GridSeries::new(geometry, t0, steps)
    } else {
        GridSeries::derived(geometry, t0, steps)
    }
}

/// Writes `series` as PPG. Values are rounded to `f32`; a series whose
/// values are already `f32`-representable round-trips bit-exactly.
pub fn write_grid_series(series: &GridSeries, path: impl AsRef<Path>) -> Result<()> {
    series.validate()?;
    write_derived_series(series, path)
}

/// Writes without the TP sign check; the result is only readable with
/// [`read_derived_series`] if it holds negative TP.
pub fn write_derived_series(series: &GridSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode(series, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn encode(series: &GridSeries, w: &mut impl Write) -> std::io::Result<()> {
    let g = series.geometry();
    w.write_all(PPG_MAGIC)?;
    w.write_all(&[g.kind().code()])?;
    w.write_all(&(g.nlat() as u32).to_le_bytes())?;
    w.write_all(&(g.nlon() as u32).to_le_bytes())?;
    w.write_all(&(series.len() as u32).to_le_bytes())?;
    for x in g.lat().iter().chain(g.lon()) {
        w.write_all(&x.to_le_bytes())?;
    }
    w.write_all(&series.t0().to_le_bytes())?;
    w.write_all(&STEP_SECONDS.to_le_bytes())?;
    let mut buf = Vec::with_capacity(4 * g.ncells());
    for step in series.steps() {
        buf.clear();
        for &v in step {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    let mut bits = vec![0u8; g.ncells().div_ceil(8)];
    for (i, &ok) in g.mask().iter().enumerate() {
        if ok {
            bits[i / 8] |= 1 << (i % 8);
        }
    }
    w.write_all(&bits)
}
