use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("all {0} input rows were removed during cleaning")]
    AllRowsRemoved(usize),

    #[error("zero variance after transform in column(s): {}", .0.join(", "))]
    ZeroVariance(Vec<String>),

    #[error("non-positive value {value} in column `{column}` at row {row} cannot be log-transformed")]
    NonPositive { column: String, row: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("too few points: {points} points cannot form {clusters} clusters")]
    TooFewPoints { points: usize, clusters: usize },

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error(
        "feature dimension {dims} is not divisible by {subspaces} subspaces; valid subspace counts: {}",
        .valid.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(", ")
    )]
    IndivisibleDims { dims: usize, subspaces: usize, valid: Vec<usize> },

    #[error("code entry {entry} at position {position} is out of range for {centroids} centroids")]
    CodeOutOfRange { position: usize, entry: u64, centroids: usize },

    #[error("class count {centroids}^{subspaces} overflows a signed 64-bit integer")]
    Overflow { subspaces: usize, centroids: usize },

    #[error("parameter grid is empty")]
    EmptyGrid,

    #[error("unsupported format_version {found} (expected {expected})")]
    FormatVersionMismatch { found: u64, expected: u64 },

    #[error("corrupt file {}: {reason}", .path.display())]
    CorruptFile { path: PathBuf, reason: String },

    #[error("dataset has no lon/lat coordinates")]
    MissingCoords,

    #[error("unknown distance mode `{name}`; registered modes: {}", .known.join(", "))]
    UnknownStrategy { name: String, known: Vec<String> },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", .path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
