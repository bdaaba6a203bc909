use thiserror::Error;

pub type Result<T, E = DyneError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DyneError {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The record carries no usable phase information for the requested estimator.
    #[error("ambiguous estimate: magnitude {magnitude:e} is at or below tolerance")]
    AmbiguousEstimate { magnitude: f64 },

    /// The resultant of a phase sample is too short for a mean direction to exist.
    #[error("degenerate circular mean: resultant length {resultant:e}")]
    DegenerateMean { resultant: f64 },

    /// A model or ensemble parameter failed validation.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

impl DyneError {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        DyneError::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
