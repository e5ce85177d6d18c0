use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "singular surrogate fit: {samples} samples for {coefficients} coefficients with ridge = 0; \
         use a ridge > 0 or draw at least {coefficients} samples"
    )]
    SingularFit { samples: usize, coefficients: usize },

    #[error("black box returned non-finite value {value} at input {input:?}")]
    NonFinite { input: Vec<f64>, value: f64 },

    #[error("training error: {0}")]
    Training(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Schema(_) | Error::Parse { .. } | Error::Json(_)
        )
    }
}
