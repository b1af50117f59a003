use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: String,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: row {row} has {found} cells, expected {expected}")]
    RowWidth {
        path: String,
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    /// Input validation found one or more problems; each entry is one line.
    #[error("{}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("k = {k} out of range: must be at most {limit}")]
    KOutOfRange { k: usize, limit: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("{0}")]
    Precondition(String),

    #[error("constraint rule error: {0}")]
    Rule(String),

    #[error("unknown field `{0}`")]
    UnknownField(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("report changed since card built (card digest {card}, report digest {report})")]
    ReportChanged { card: String, report: String },

    #[error("image error: {0}")]
    Image(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from user input (bad data, config or arguments)
    /// rather than an internal failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Serde(_))
    }

    /// Stable numeric code used in `E<code>: <message>` diagnostics.
    pub fn code(&self) -> u32 {
        match self {
            Error::Parse { .. } => 101,
            Error::RowWidth { .. } => 102,
            Error::DuplicateId(_) => 103,
            Error::InvalidData(_) => 104,
            Error::Validation(_) => 105,
            Error::Config(_) => 201,
            Error::UnknownMetric(_) => 202,
            Error::KOutOfRange { .. } => 301,
            Error::DimensionMismatch { .. } => 302,
            Error::Precondition(_) => 303,
            Error::Rule(_) => 401,
            Error::UnknownField(_) => 402,
            Error::Manifest(_) => 501,
            Error::ReportChanged { .. } => 502,
            Error::Image(_) => 601,
            Error::Io { .. } => 901,
            Error::Serde(_) => 902,
        }
    }
}
