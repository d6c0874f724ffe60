use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-range arguments (dimension mismatch, empty input, NaN).
    #[error("invalid argument: {0}")]
    Argument(String),
    /// Operation applied to the wrong task (classification vs regression).
    #[error("task mismatch: {0}")]
    Task(String),
    /// A column named by the schema is missing, or the schema is inconsistent.
    #[error("schema error: {0}")]
    Schema(String),
    /// An input file has the wrong shape or unparseable contents.
    #[error("format error: {0}")]
    Format(String),
    /// A value failed validation (simplex sums, config constraints, unknown names).
    #[error("validation error: {0}")]
    Validation(String),
    /// A base predictor could not be fitted.
    #[error("fit error: {0}")]
    Fit(String),
    /// Gradient training produced a non-finite objective.
    #[error("training error: {0}")]
    Training(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Argument(_)
                | Error::Task(_)
                | Error::Schema(_)
                | Error::Format(_)
                | Error::Validation(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
