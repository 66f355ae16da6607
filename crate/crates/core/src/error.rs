use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot normalize a zero-norm vector")]
    ZeroNorm,
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vector is not unit norm (norm = {norm})")]
    NotUnitNorm { norm: f64 },
    #[error("at least one negative key is required")]
    EmptyNegatives,
    #[error("batch needs at least 2 pairs, got {0}")]
    BatchTooSmall(usize),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),
    #[error("requested {requested} entries but only {available} are stored")]
    InsufficientEntries { requested: usize, available: usize },
    #[error("momentum coefficient must lie in [0, 1], got {0}")]
    InvalidMomentum(f64),
    #[error("iteration {given} precedes last pushed iteration {last}")]
    NonMonotoneIteration { last: u64, given: u64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed binary data: {0}")]
    Format(String),
    #[error("file length {len} is not a multiple of the {record_size}-byte record size")]
    RecordSize { len: usize, record_size: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
