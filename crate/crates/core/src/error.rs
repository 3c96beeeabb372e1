use thiserror::Error;

/// Errors surfaced by the analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A sequence or run specification failed validation.
    #[error("invalid value for field `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("horizon {horizon} is too small (minimum {minimum})")]
    HorizonTooSmall { horizon: usize, minimum: usize },

    #[error("evaluator failure at p = {p}: {reason}")]
    Evaluator { p: usize, reason: String },

    #[error("p_cap too small: maximizer sits at the search bound p_cap = {p_cap}")]
    PCapTooSmall { p_cap: usize },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("values not in Lambda_M at this horizon: {0}")]
    NotInLambda(String),

    /// A moment-map report would claim a bijective moment mapping.
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
