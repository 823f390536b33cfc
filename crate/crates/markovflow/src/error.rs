//! Crate-wide error type. Variants correspond to the failure modes of the
//! structured algebra, the kernel evaluators, the closed-form flows and the
//! scenario runner, so they can be mapped one-to-one onto C ABI status codes.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    #[error("Bernoulli order {0} exceeds the exact-table cap of 60")]
    BernoulliOrderTooLarge(usize),

    #[error("eigenvalue {value} lies within {margin} of the pole 2πi·{pole_index}")]
    PoleProximity {
        value: String,
        pole_index: i64,
        margin: f64,
    },

    #[error(
        "matrix is defective with spectral radius {rho:.6} ≥ {limit:.6}; \
         neither the eigendecomposition nor the Taylor fallback applies"
    )]
    IllConditionedNoFallback { rho: f64, limit: f64 },

    #[error("quadrature did not converge below {tol:e} (best estimate {achieved:e} after {refinements} refinements)")]
    QuadratureNotConverged {
        tol: f64,
        achieved: f64,
        refinements: u32,
    },

    #[error("series did not converge below {tol:e} within {max_terms} terms (last term {last:e})")]
    SeriesNotConverged {
        tol: f64,
        max_terms: usize,
        last: f64,
    },

    #[error("summatory parameter x = {x} ≥ 1: the equal-input principal logarithm is undefined")]
    XGeOne { x: f64 },

    #[error("invalid generator family: {0}")]
    InvalidFamily(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error(
        "family constants do not commute: max commutator norm {norm:e} between terms {i} and {j}"
    )]
    NotCommuting { norm: f64, i: usize, j: usize },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("matrix has an eigenvalue on the closed negative real axis ({value}); principal logarithm undefined")]
    NonpositiveSpectrum { value: String },

    #[error("Schur iteration did not converge; eigenvalues unavailable")]
    EigenvaluesNotConverged,

    #[error("scenario schema error at {path}: {message}")]
    SchemaError { path: String, message: String },

    #[error("{context}: {source}")]
    WithContext {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Wraps an error with scenario or operation context.
    pub fn context(self, what: impl Into<String>) -> Error {
        Error::WithContext {
            context: what.into(),
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
