use std::path::PathBuf;

use crate::solver::SolveStatus;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    Model(String),
    #[error("invalid case: {0}")]
    Case(String),
    #[error("network not connected")]
    Disconnected,
    #[error("invalid scenario data: {0}")]
    Scenarios(String),
    #[error("correlation matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("scenario index {index} out of range ({count} scenarios)")]
    ScenarioIndex { index: usize, count: usize },
    #[error("big-M value {value:.3e} for row {row} exceeds 1e9; use a fixed big-M")]
    BigMOverflow { row: String, value: f64 },
    #[error("solution violates {constraint} by {magnitude:.3e}")]
    Invariant { constraint: String, magnitude: f64 },
    #[error("heuristic found no feasible assignment")]
    HeuristicFailed,
    #[error("solver returned {0}")]
    Solver(String),
    #[error("{method} returned {status}")]
    Unsolved { method: String, status: SolveStatus },
    #[error("internal error: {0}")]
    Internal(String),
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), message: message.into() }
    }
}
