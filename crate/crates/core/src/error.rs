use std::path::PathBuf;

/// Errors produced anywhere in the segmentation stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("expected {expected} band(s), found {found}")]
    BandMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("problem has {num_vars} variables, above the exhaustive solver cap of {cap}")]
    TooLarge { num_vars: usize, cap: usize },

    #[error("solver configuration: {0}")]
    Config(String),

    #[error("relative error is undefined for a zero reference value")]
    UndefinedReference,

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("feature mismatch: {0}")]
    FeatureMismatch(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures that originate in a solver rather than in the input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::TooLarge { .. } | Error::Config(_) | Error::Divergence { .. }
        )
    }

    /// True for filesystem and file-format failures.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Format { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
