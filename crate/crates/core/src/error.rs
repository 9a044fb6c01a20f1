use thiserror::Error;

/// Errors raised by the numerical engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("degenerate spectrum: lambda1 = {lambda1}, lambda2 = {lambda2} are not distinct")]
    DegenerateSpectrum { lambda1: f64, lambda2: f64 },

    #[error("Merton factors are undefined for nu01 = 0 (F1 divides by nu01)")]
    IllposedFactors,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow: |u| = {value} exceeds cap {cap} at node {node}")]
    Overflow { node: usize, value: f64, cap: f64 },

    #[error("non-finite value at time level {level}, node {node}")]
    NonFinite { level: usize, node: usize },

    #[error("tridiagonal factorization hit a zero pivot at row {row}")]
    SingularMatrix { row: usize },

    #[error("no convergence after {iterations} iterations (last increment {increment:e})")]
    NoConvergence {
        iterations: usize,
        increment: f64,
        history: Vec<f64>,
    },

    #[error("monotonicity violated between truncation levels {lower} and {upper}: increase of {excess:e}")]
    MonotonicityViolation { lower: f64, upper: f64, excess: f64 },

    #[error("payoff is not bounded on the grid: {0}")]
    UnboundedPayoff(String),

    #[error("audit {check} failed: {detail}")]
    AuditFailure { check: String, detail: String },
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
