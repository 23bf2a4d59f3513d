use thiserror::Error;

/// Error type shared by every module of the crate.
#[derive(Debug, Error)]
pub enum GwsError {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{source_name}:{line}: {msg}")]
    Parse {
        source_name: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("not force closure: {0}")]
    NotForceClosure(String),
}

impl GwsError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        GwsError::Invalid(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        GwsError::Numerical(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        GwsError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, GwsError>;
