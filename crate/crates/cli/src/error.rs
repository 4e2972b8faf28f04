use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dissipative::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("cannot write {}: {source}", path.display())]
    Output { path: PathBuf, source: io::Error },
}

/// Process exit status of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    NumericalFailure = 1,
    InputError = 2,
    BudgetExceeded = 3,
}

impl CliError {
    pub fn status(&self) -> Status {
        match self {
            CliError::Core(dissipative::Error::BudgetExceeded { .. }) => Status::BudgetExceeded,
            CliError::Core(e) if e.is_input_error() => Status::InputError,
            CliError::Core(_) | CliError::Output { .. } => Status::NumericalFailure,
            CliError::Config(_) | CliError::InvalidInstance(_) => Status::InputError,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
