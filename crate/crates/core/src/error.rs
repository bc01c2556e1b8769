use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: malformed tensor header: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("{path}: expected a rank-{expected} tensor, found rank {found}")]
    RankMismatch {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{path}: non-finite value at flat index {index}")]
    NonFiniteValue { path: PathBuf, index: usize },

    #[error("{path}: unsupported dtype {descr:?}")]
    UnsupportedDtype { path: PathBuf, descr: String },

    #[error("{path}: schema error: {reason}")]
    SchemaError { path: PathBuf, reason: String },

    #[error("{path}: referenced file does not exist")]
    MissingFile { path: PathBuf },

    #[error("split {split:?}: category {index} appears in both {first:?} and {second:?}")]
    GroupOverlap {
        split: String,
        index: usize,
        first: String,
        second: String,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("label {label} out of range for {k} categories")]
    LabelOutOfRange { label: u16, k: usize },

    #[error("zero vector: {0}")]
    ZeroVector(String),

    #[error("confusion matrix holds no pixels")]
    EmptyMatrix,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile { path: path.into() }
        } else {
            Error::Io {
                path: path.into(),
                source,
            }
        }
    }

    pub(crate) fn schema(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::SchemaError {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
