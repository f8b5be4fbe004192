use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("singular steady state: total decay rate vanishes at zero detuning")]
    SingularSteadyState,

    #[error("undefined efficiency: coupling and loss rates are both zero")]
    UndefinedEfficiency,

    #[error("mode coefficient on the {side} side is zero")]
    ZeroModeCoefficient { side: &'static str },

    #[error("grazing diffraction order ({m1}, {m2}): |Q| = k, coupling diverges")]
    GrazingOrder { m1: i32, m2: i32 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no converged solution: {0}")]
    NonConvergence(String),

    #[error("singular linear system (pivot magnitude {pivot:e})")]
    SingularSystem { pivot: f64 },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            reason: reason.into(),
        }
    }

    /// Validation failures versus numerical failures; the CLI maps these to
    /// distinct exit codes.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Invalid { .. }
                | Error::ZeroModeCoefficient { .. }
                | Error::Domain(_)
                | Error::UndefinedEfficiency
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
