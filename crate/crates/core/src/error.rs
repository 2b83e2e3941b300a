//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A point left the domain a field or solution was prepared on.
    #[error("out of domain: {0}")]
    OutOfDomain(String),

    /// The frequency grid cannot resolve the requested density.
    #[error(
        "insufficient frequency cutoff: have u_max = {have:.3e}, spectrum decay \
         requires u_max >= {needed:.3e} (n >= {needed_n} at the current box)"
    )]
    Resolution { have: f64, needed: f64, needed_n: usize },

    /// A measured residual or quadrature error exceeded its tolerance.
    #[error("accuracy failure in {what}: measured {measured:.3e} > tolerance {tol:.3e}")]
    Accuracy { what: String, measured: f64, tol: f64 },

    /// The backward-solve contraction precondition failed.
    #[error(
        "horizon too large: 2 C(T) ||b|| = {product:.4} > 1/2 at T = {horizon:.4}; \
         largest admissible horizon found by bisection: {max_admissible:.4}"
    )]
    HorizonTooLarge { horizon: f64, product: f64, max_admissible: f64 },

    /// Picard or fixed-point iteration failed to converge.
    #[error("iteration diverged in {what} after {iterations} steps; diff history {history:?}")]
    Divergence { what: String, iterations: usize, history: Vec<f64> },

    /// A simulated state became non-finite (bug signal for bounded drift).
    #[error("state blow-up at step {step}: non-finite state")]
    BlowUp { step: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
