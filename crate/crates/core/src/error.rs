use thiserror::Error;

/// Errors raised by the filters and models.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Every weight is zero; the particle approximation has collapsed.
    #[error("degenerate weights: every particle has zero weight")]
    DegenerateWeights,

    /// An input violated a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Target coincides with the sensor, so the bearing is undefined.
    #[error("singular geometry: target coincides with sensor")]
    SingularGeometry,

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    /// A filter step failed; `step` is 1-based.
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Strips any `AtStep` annotation.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
