//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error)]
pub enum CoreError {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The modified-Hamiltonian construction could not certify convexity
    /// within its retry budget.
    #[error(
        "construction failure: sampled p-Hessian eigenvalue {worst_eigenvalue:.6e} at \
         x = {x:?}, p = {p:?} after {retries} retries (mu = {mu:.6e})"
    )]
    ConstructionFailure {
        worst_eigenvalue: f64,
        x: Vec<f64>,
        p: Vec<f64>,
        retries: usize,
        mu: f64,
    },

    /// The conjugate (Legendre) solve did not converge.
    #[error(
        "conjugate failure at x = {x:?}, v = {v:?}: best bracket [{bracket_lo:.6e}, \
         {bracket_hi:.6e}], gradient residual {residual:.6e}"
    )]
    ConjugateFailure {
        x: Vec<f64>,
        v: Vec<f64>,
        bracket_lo: f64,
        bracket_hi: f64,
        residual: f64,
    },

    /// Configuration file rejected; `pointer` is the JSON pointer of the
    /// offending entry.
    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidArgument(msg.into())
    }

    pub(crate) fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        CoreError::Config {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}
