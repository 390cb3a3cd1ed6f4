use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (bad index,
    /// mismatched dimensions, non-Hermitian input where Hermitian is required).
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition of the operation does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Integration produced a state that is no longer a valid density matrix.
    #[error("numerical instability in {context}: eigenvalue {eigenvalue:e} below tolerance")]
    NumericalInstability { context: String, eigenvalue: f64 },

    /// Iterative search failed to reach its target.
    #[error("search did not converge: {0}")]
    Convergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
