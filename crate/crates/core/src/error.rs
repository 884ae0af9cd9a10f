use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("row {row} out of range for a sketch with {rows} rows")]
    RowOutOfRange { row: usize, rows: usize },

    #[error("decode error: {0}")]
    Decode(String),

    #[error("sketchlet address {addr} out of range for width {width}")]
    AddressOutOfRange { addr: u64, width: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("input error: {0}")]
    Input(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("invalid experiment spec: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
