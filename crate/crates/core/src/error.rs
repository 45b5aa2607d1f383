use std::path::PathBuf;

/// Failure categories map onto the CLI exit-code table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numeric,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Data => 3,
            ErrorCategory::Numeric => 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("degenerate normalization stats for `{source_id}`: min == max == {value}")]
    DegenerateStats { source_id: String, value: f64 },

    #[error("signal shorter than one window: `{source_id}` has {len} samples, window is {window}")]
    SignalTooShort {
        source_id: String,
        len: usize,
        window: usize,
    },

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("null spectrum: largest Laplacian eigenvalue is {0}")]
    NullSpectrum(f64),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("non-finite value in `{0}`")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) => ErrorCategory::Config,
            Error::Data(_)
            | Error::DegenerateStats { .. }
            | Error::SignalTooShort { .. }
            | Error::File { .. }
            | Error::Io(_) => ErrorCategory::Data,
            Error::Shape { .. } => ErrorCategory::Data,
            Error::NullSpectrum(_)
            | Error::NoConvergence { .. }
            | Error::NonFinite(_)
            | Error::Diverged { .. } => ErrorCategory::Numeric,
        }
    }

    pub(crate) fn shape(
        context: impl Into<String>,
        expected: impl std::fmt::Display,
        actual: impl std::fmt::Display,
    ) -> Self {
        Error::Shape {
            context: context.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, message: impl std::fmt::Display) -> Self {
        Error::File {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
