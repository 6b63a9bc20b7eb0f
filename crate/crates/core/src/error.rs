use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("caption is empty after normalization")]
    EmptyCaption,

    #[error("operation requires a non-empty set")]
    EmptySet,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not symmetric (max |M - M^T| = {max_asymmetry:e})")]
    Symmetry { max_asymmetry: f64 },

    #[error("matrix is not positive semidefinite (pivot {pivot:e})")]
    NotPositiveSemidefinite { pivot: f64 },

    #[error("matrix is singular after ridge (pivot {pivot:e} at step {step})")]
    Singularity { step: usize, pivot: f64 },

    #[error("capacity exceeded: {what} ({size} > {limit})")]
    Capacity {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("token `{0}` is not in the vocabulary")]
    Vocab(String),

    #[error("format error in {source_name}: {message}")]
    Format {
        source_name: String,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(source_name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            source_name: source_name.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
