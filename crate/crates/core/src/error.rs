use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("natural parameters outside the family domain: {0}")]
    Domain(String),

    #[error("singular model: {0}")]
    SingularModel(String),

    #[error("unknown microstate: {0}")]
    UnknownMicrostate(String),

    #[error("mean parameters are not attainable: {0}")]
    InfeasibleMean(String),

    #[error("Newton solve did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("finite-difference step leaves the feasible set: {0}")]
    StepTooLarge(String),

    #[error("state is at equilibrium (sigma = {sigma:e}); the flow direction is undefined")]
    AtEquilibrium { sigma: f64 },

    #[error("step collapsed after {halvings} halvings at tau = {tau}: {reason}")]
    StepCollapse {
        halvings: usize,
        tau: f64,
        reason: String,
    },

    #[error("trajectory has {got} samples, at least {needed} are required")]
    TooFewSamples { got: usize, needed: usize },

    #[error("component {component} is not strictly monotone along the trajectory")]
    Monotonicity { component: usize },

    #[error("ill-conditioned regression: {0}")]
    IllConditioned(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid family: {0}")]
    InvalidFamily(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable name used in CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "DomainError",
            Error::SingularModel(_) => "SingularModelError",
            Error::UnknownMicrostate(_) => "UnknownMicrostateError",
            Error::InfeasibleMean(_) => "InfeasibleMeanError",
            Error::NoConvergence { .. } => "NoConvergenceError",
            Error::StepTooLarge(_) => "StepTooLargeError",
            Error::AtEquilibrium { .. } => "AtEquilibriumError",
            Error::StepCollapse { .. } => "StepCollapseError",
            Error::TooFewSamples { .. } => "TooFewSamplesError",
            Error::Monotonicity { .. } => "MonotonicityError",
            Error::IllConditioned(_) => "IllConditionedError",
            Error::Dimension { .. } => "DimensionError",
            Error::InvalidFamily(_) => "InvalidFamilyError",
            Error::Parse(_) => "ParseError",
            Error::Validation(_) => "ValidationError",
            Error::Unsupported(_) => "UnsupportedError",
            Error::Io(_) => "IoError",
        }
    }

    /// True for errors that mean the requested point lies outside the
    /// feasible set (as opposed to a numerical breakdown).
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::InfeasibleMean(_))
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
