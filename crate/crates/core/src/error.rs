use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("design has {requested} columns, exceeding the configured maximum of {max}")]
    DimensionOverflow { requested: usize, max: usize },

    /// A linear solve or moment update produced a non-representable value.
    #[error("numerical failure{}: {message}", sweep.map(|s| format!(" at sweep {s}")).unwrap_or_default())]
    Numerical {
        sweep: Option<usize>,
        message: String,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical {
            sweep: None,
            message: msg.into(),
        }
    }

    /// Attach a sweep index to a numerical error that does not carry one yet.
    pub(crate) fn at_sweep(self, sweep: usize) -> Self {
        match self {
            Error::Numerical { sweep: None, message } => Error::Numerical {
                sweep: Some(sweep),
                message,
            },
            other => other,
        }
    }
}
