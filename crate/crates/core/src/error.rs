use std::path::PathBuf;

use crate::cohort::CohortLabel;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("{class}: need {need}, have {have}")]
    Capacity {
        class: CohortLabel,
        need: usize,
        have: usize,
    },

    #[error("cohort patient {0} has no timeline")]
    MissingPatient(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("neighbor graph is disconnected ({components} components); increase n_neighbors")]
    Disconnected { components: usize },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: String, iterations: usize },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("missing artifact {artifact}; run `{subcommand}` first")]
    Dependency {
        artifact: PathBuf,
        subcommand: &'static str,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
