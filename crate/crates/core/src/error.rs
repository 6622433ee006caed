use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: u64, reason: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value at step {step}, cell {cell}")]
    NonFiniteValue { step: usize, cell: usize },
    #[error("negative TP value {value} at step {step}, cell {cell}")]
    NegativeTp { step: usize, cell: usize, value: f64 },
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("crop range does not intersect the grid")]
    EmptyIntersection,
    #[error("grid {nlat}x{nlon} is too small (need at least {min} in each axis)")]
    TooSmallGrid { nlat: usize, nlon: usize, min: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("bad layer widths {0:?}")]
    BadWidths(Vec<usize>),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
    #[error("unsupported checkpoint version or magic {0:?}")]
    VersionMismatch([u8; 4]),
    #[error("empty sample")]
    EmptySample,
    #[error("probability {0} outside (0, 1)")]
    BadProb(f64),
    #[error("batch of {got} is too small for {bins} quantile bins (need {need})")]
    BatchTooSmall { got: usize, bins: usize, need: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("bad dimensions: {0}")]
    BadDimensions(String),
    #[error("bad coarsening factor {0}")]
    BadFactor(usize),
    #[error("singular normal equations for offset {offset}")]
    SingularSystem { offset: usize },
    #[error("series of {len} steps is shorter than segment length {need}")]
    SeriesTooShort { len: usize, need: usize },
    #[error("series misaligned: {0}")]
    MisalignedSeries(String),
    #[error("field kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: &'static str, found: &'static str },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
