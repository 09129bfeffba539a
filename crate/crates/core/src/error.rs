use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("column `{0}` not found in CSV header")]
    MissingColumn(String),
    #[error("no usable rows in input ({dropped} dropped)")]
    NoUsableRows { dropped: usize },
    #[error("numeric column `{0}` has no observed values")]
    EmptyNumericColumn(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("feature mismatch: model expects {expected:?}, got {actual:?}")]
    FeatureMismatch { expected: Vec<String>, actual: Vec<String> },
    #[error("singular linear system (ridge = {ridge})")]
    Singular { ridge: f64 },
    #[error("non-positive actual value {value} at position {index} passed to MAPE")]
    NonPositiveActual { index: usize, value: f64 },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty subset: {0}")]
    EmptySubset(String),
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
