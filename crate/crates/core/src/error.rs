//! Crate-wide error type with a coarse classification used for process exit
//! codes (validation 1, numerical 2, capacity 3).

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Input rejected before any computation ran.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A hard size cap was exceeded.
    #[error("{what}: n = {n} exceeds the cap of {cap}")]
    Capacity { what: &'static str, n: usize, cap: usize },

    /// Bond dimension required by the truncation cutoff exceeds the cap.
    #[error("bond dimension cap {cap} exceeded at t = {t}: cutoff requires {needed}")]
    ChiCap { t: f64, needed: usize, cap: usize },

    /// Conserved quantity drifted beyond its tolerance.
    #[error("{what} drift {value:e} exceeds tolerance {tol:e} at t = {t}")]
    Drift { what: &'static str, value: f64, tol: f64, t: f64 },

    /// Algorithmic numerical failure (non-finite values, failed factorization).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An iterative routine exhausted its budget.
    #[error("no convergence: {what} (last residual {residual:e})")]
    Convergence { what: &'static str, residual: f64 },

    #[error("linear algebra backend: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Coarse failure class, stable across error variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Capacity,
}

impl CoreError {
    pub fn class(&self) -> ErrorClass {
        match self {
            CoreError::Invalid(_) | CoreError::Io(_) => ErrorClass::Validation,
            CoreError::Capacity { .. } | CoreError::ChiCap { .. } => ErrorClass::Capacity,
            CoreError::Drift { .. }
            | CoreError::Numerical(_)
            | CoreError::Convergence { .. }
            | CoreError::Linalg(_) => ErrorClass::Numerical,
        }
    }
}
