use thiserror::Error;

/// Errors raised by the numerical engine and the simulators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("quadrature node computation did not converge for order {order}")]
    QuadratureNoConvergence { order: usize },

    #[error("non-finite integrand value {value} at node ({z1}, {z2})")]
    NonFiniteIntegrand { z1: f64, z2: f64, value: f64 },

    #[error("unknown nonlinearity `{name}`; available: {available}")]
    UnknownNonlinearity { name: String, available: String },

    #[error("nonlinearity `{name}` has no smooth second derivative; {operation} is unsupported")]
    UnsupportedActivation {
        name: String,
        operation: &'static str,
    },

    #[error("{what} did not converge after {iterations} iterations (last iterate {last})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        last: f64,
    },

    #[error("{what} is undefined at q* = 0")]
    ZeroFixedPoint { what: &'static str },

    #[error("no sign change of {what} in bracket [{lo}, {hi}]")]
    NoBracket { what: &'static str, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate tangent (v·v = 0){}", .theta.map(|t| format!(" at theta = {t}")).unwrap_or_default())]
    DegenerateTangent { theta: Option<f64> },

    #[error("numerical inconsistency: {0}")]
    Numerical(String),

    #[error("boundary search failed: best residual {best_residual} after {iterations} iterations")]
    BoundaryNoConvergence {
        best_residual: f64,
        iterations: usize,
    },

    #[error("vanishing gradient of the decision function (norm {grad_norm})")]
    VanishingGradient { grad_norm: f64 },

    #[error("normal-direction eigenvalue not separable from the spectrum: {0}")]
    DegenerateProjection(String),

    #[error("activation matrix is rank deficient; use a ridge parameter > 0")]
    RankDeficient,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}
