use std::io;

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("singular Jacobian: pivot {pivot:e} at column {column}")]
    SingularJacobian { column: usize, pivot: f64 },

    #[error("rank deficient: requested {requested} modes, numerical rank is {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { found: u16, expected: u16 },

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("sample budget exhausted: {produced} of {requested} series after {attempts} attempts")]
    BudgetExhausted {
        requested: usize,
        produced: usize,
        attempts: usize,
    },

    #[error("missing labels: {0}")]
    MissingLabels(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
