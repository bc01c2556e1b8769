use std::path::PathBuf;

use aquaseg_core::Error as CoreError;

/// Process exit code for a data error.
pub const EXIT_DATA: i32 = 1;
/// Process exit code for a configuration error.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("sample {sample_id}: {source}")]
    Sample {
        sample_id: String,
        #[source]
        source: CoreError,
    },

    #[error(transparent)]
    Data(CoreError),

    #[error("{path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => EXIT_CONFIG,
            BenchError::Data(CoreError::InvalidConfig(_)) => EXIT_CONFIG,
            _ => EXIT_DATA,
        }
    }

    pub(crate) fn sample(sample_id: &str) -> impl FnOnce(CoreError) -> BenchError + '_ {
        move |source| BenchError::Sample {
            sample_id: sample_id.to_string(),
            source,
        }
    }

    pub(crate) fn output(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> BenchError {
        let path = path.into();
        move |source| BenchError::Output { path, source }
    }
}

impl From<CoreError> for BenchError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidConfig(reason) => BenchError::Config(reason),
            other => BenchError::Data(other),
        }
    }
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
