use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular cycle map: |g| = {g:e} is below the floor {floor:e}")]
    SingularMap { g: f64, floor: f64 },

    #[error("renormalized product collapsed to the zero matrix after {cycles} factors")]
    ZeroMatrix { cycles: usize },

    #[error("x-ratio has a pole at theta = {theta}")]
    PoleAt { theta: f64 },

    #[error("sample {value} is not positive")]
    NonPositiveSample { value: f64 },

    #[error("cycle with |h| = {h} is not in an instability band (need |h| > 1)")]
    InvalidH { h: f64 },

    #[error("degenerate sample x = 1 gives log(0)")]
    DegenerateSample,

    #[error("orbit produced {found} pericenter passages, at least 2 are required")]
    TooFewCycles { found: usize },

    #[error("position ({x}, {z}) is outside the domain of the force field")]
    OutsideDomain { x: f64, z: f64 },

    #[error("integrator failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("quadrature did not converge: error estimate {estimate:e} exceeds {tol:e}")]
    QuadratureFailure { estimate: f64, tol: f64 },

    #[error("fit failure: {0}")]
    FitFailure(String),

    #[error("root finding failed: {0}")]
    RootFailure(String),
}

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// The request itself lies outside the mathematical domain.
    Domain,
    /// A numerical method failed on an otherwise valid request.
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter(_)
            | Error::SingularMap { .. }
            | Error::PoleAt { .. }
            | Error::NonPositiveSample { .. }
            | Error::InvalidH { .. }
            | Error::DegenerateSample
            | Error::TooFewCycles { .. }
            | Error::OutsideDomain { .. } => ErrorClass::Domain,
            Error::ZeroMatrix { .. }
            | Error::StepFailure { .. }
            | Error::QuadratureFailure { .. }
            | Error::FitFailure(_)
            | Error::RootFailure(_) => ErrorClass::Numeric,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn require_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {v}")))
    }
}
