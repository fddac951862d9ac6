use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidInput { field: String, reason: String },

    #[error("index {index} out of range for {len} miners")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("at least two miners are required, got {0}")]
    TooFewMiners(usize),

    #[error("best-response iteration did not converge after {sweeps} sweeps (max step {max_step:e})")]
    NonConvergence {
        sweeps: usize,
        max_step: f64,
        last_iterate: Vec<f64>,
        residuals: Vec<f64>,
    },

    #[error("boundary state: the active set changes under a small perturbation of {parameter}")]
    BoundaryState { parameter: String },

    #[error("finite-difference stencil crosses a regime change in {parameter}")]
    StencilCrossing { parameter: String },

    #[error("inconsistent calibration: implied gamma {0} is negative")]
    InconsistentCalibration(f64),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("no observations in month {0}")]
    EmptyMonth(String),

    #[error("non-positive gross return at {0:?}")]
    NonPositiveReturn(Vec<String>),

    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::BoundaryState { .. } | Error::StencilCrossing { .. }
        )
    }
}
