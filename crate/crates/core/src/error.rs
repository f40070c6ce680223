use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// A loss could not be evaluated, e.g. `exp` overflowed in a Poisson row.
    #[error("evaluation error in row {row}: {message}")]
    Evaluation { row: usize, message: String },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("prox dispatched to the wrong closed form: {0}")]
    WrongDispatch(String),

    /// The line search needed more trial steps than the a-priori bound allows.
    /// This only happens when the smoothness constant is too small.
    #[error(
        "line search at outer step {outer} exceeded {limit} trial steps; \
         the smoothness constant is not a valid Lipschitz bound"
    )]
    SmoothnessInvalid { outer: usize, limit: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{what} refuses n = {n} (limit {limit})")]
    TooLarge {
        what: &'static str,
        n: usize,
        limit: usize,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Evaluation { .. } | Error::SmoothnessInvalid { .. } | Error::ContractViolation(_)
        )
    }
}
