use thiserror::Error;

/// Errors produced by the numeric kernels, manifold operations and engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("no convergence after {iterations} iterations: {what}")]
    Convergence { what: &'static str, iterations: usize },
    /// The input sits on or beyond the boundary of the principal branch /
    /// injectivity domain. The trivialization engine answers this with a restart.
    #[error("outside the injectivity domain: {0}")]
    Branch(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    /// Errors that a trivialization run recovers from by re-basing.
    pub fn is_restartable(&self) -> bool {
        matches!(
            self,
            Error::Branch(_) | Error::Singular(_) | Error::Convergence { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
