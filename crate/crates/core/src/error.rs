use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("site index {site} out of range for a system of {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("site {0} appears more than once in the support")]
    DuplicateSite(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("operator is not unitary (max |U^dag U - I| = {0:.3e})")]
    NotUnitary(f64),

    #[error("not a valid density matrix: {0}")]
    InvalidState(String),

    #[error("not injective: two-site rank {rank}, expected {expected}")]
    NotInjective { rank: usize, expected: usize },

    #[error("dimension budget exceeded: {what} needs {required}, budget is {budget}")]
    BudgetExceeded { what: String, required: usize, budget: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("linear algebra failure: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl Error {
    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Errors caused by the caller's input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::SiteOutOfRange { .. }
                | Error::DuplicateSite(_)
                | Error::InvalidInput(_)
                | Error::NotUnitary(_)
                | Error::InvalidState(_)
                | Error::NotInjective { .. }
                | Error::Parse { .. }
                | Error::Io { .. }
        )
    }
}
