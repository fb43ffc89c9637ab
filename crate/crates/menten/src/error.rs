//! Crate-wide error type.

use thiserror::Error;

/// Reason an integration run stopped before reaching `t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationFailure {
    /// Step budget exhausted.
    MaxSteps,
    /// Newton iteration on an implicit stage stopped making progress.
    NewtonDivergence,
    /// The right-hand side returned a non-finite value.
    NonFiniteRhs,
    /// Step size shrank below the resolution of the time variable.
    StepUnderflow,
}

impl std::fmt::Display for IntegrationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IntegrationFailure::MaxSteps => write!(f, "maximum step count exceeded"),
            IntegrationFailure::NewtonDivergence => write!(f, "Newton iteration diverged"),
            IntegrationFailure::NonFiniteRhs => write!(f, "non-finite right-hand side"),
            IntegrationFailure::StepUnderflow => write!(f, "step size underflow"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter failed its domain check (positivity, finiteness, ordering).
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    /// Integration stopped early; `t_last` is the last successfully reached time.
    #[error("integration failed at t = {t_last}: {kind}")]
    Integration {
        kind: IntegrationFailure,
        t_last: f64,
    },

    /// Dense-output request outside the integrated span.
    #[error("sample time {t} outside [{t0}, {t_end}]")]
    SampleOutOfRange { t: f64, t0: f64, t_end: f64 },

    /// Newton root search did not converge; carries the last iterate.
    #[error("root search did not converge after {iterations} iterations (last iterate {last})")]
    RootNoConvergence { last: f64, iterations: usize },

    /// Newton root search hit a (numerically) singular derivative.
    #[error("singular derivative in root search at iterate {at}")]
    RootSingular { at: f64 },

    /// A fixed-point/flatness condition required of a singularly perturbed
    /// system failed its numerical check at construction.
    #[error("system condition violated: {name} = {value:e} exceeds tolerance {tol:e}")]
    ConditionViolated { name: String, value: f64, tol: f64 },

    /// An operation that consumes a trajectory received an empty one.
    #[error("empty trajectory")]
    EmptyTrajectory,

    /// A derivative estimate sampled a non-finite function value.
    #[error("non-finite sample while estimating derivatives at ({u}, {v})")]
    NonFiniteSample { u: f64, v: f64 },

    /// An analysis could not find enough usable data in its input.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Inputs to a comparison were produced under different parameters.
    #[error("mismatched parameter snapshots: {0}")]
    SnapshotMismatch(String),

    /// A precondition on the caller's inputs does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn validation(field: &str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
