use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("band degenerate: floor(K*delta) - 1 = {width} leaves no entries (K={k}, delta={delta})")]
    BandDegenerate { k: usize, delta: f64, width: i64 },

    #[error("undefined relative error: reference matrix is zero")]
    UndefinedRelativeError,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("not PSD: smallest eigenvalue {min} against largest {max}")]
    NotPsd { min: f64, max: f64 },

    #[error("fragment too sparse: curve {curve} would carry {points} point(s)")]
    FragmentTooSparse { curve: usize, points: usize },

    #[error("mask exceeds data support at ({row}, {col})")]
    MaskExceedsSupport { row: usize, col: usize },

    #[error("singular minor: completion not identifiable from the submatrix at ({row}, {col})")]
    SingularMinor { row: usize, col: usize },

    #[error("diverged: non-finite objective at rank {rank}")]
    Diverged { rank: usize },

    #[error("invalid rank {rank} for dimension {k}")]
    InvalidRank { rank: usize, k: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
