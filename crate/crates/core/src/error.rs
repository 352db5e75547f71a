use thiserror::Error;

#[derive(Debug, Error)]
pub enum GemssError {
    /// Inconsistent or out-of-range hyperparameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid argument values passed to an operation.
    #[error("input error: {0}")]
    Input(String),

    /// A malformed cell in a tabular input file.
    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// Dataset content that cannot be fitted.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("optimization diverged: {0}")]
    Divergence(String),

    #[error("data generation failed: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, GemssError>;
