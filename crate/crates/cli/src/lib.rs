//! Command-line workflows: case and scenario files, solves, out-of-sample
//! reports and the summary figure.

pub mod app;
pub mod figure;
pub mod files;

use sopf::solver::SolveStatus;

pub use app::{run, Cli};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Limit(String),
    #[error(transparent)]
    Core(sopf::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Limit(_) => 4,
            CliError::Core(_) => 1,
        }
    }
}

impl From<sopf::Error> for CliError {
    fn from(e: sopf::Error) -> Self {
        match e {
            sopf::Error::Unsolved { status: SolveStatus::Infeasible, .. } | sopf::Error::HeuristicFailed => {
                CliError::Infeasible(e.to_string())
            }
            sopf::Error::Unsolved { status, .. } if status.is_limit() => CliError::Limit(e.to_string()),
            e => CliError::Core(e),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
