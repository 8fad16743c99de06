use thiserror::Error;

pub type Result<T> = std::result::Result<T, VdaError>;

#[derive(Debug, Error)]
pub enum VdaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A malformed cell in a delimited input file. `row` is 1-based and counts
    /// the header as row 1.
    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl VdaError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        VdaError::InvalidArgument(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        VdaError::InvalidData(msg.into())
    }
}
