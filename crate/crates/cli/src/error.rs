use std::path::PathBuf;

use deadend_core::oracle::OracleError;
use deadend_core::workbench::{FormatError, GridError, ManifestError, SimError};
use deadend_core::SolveError;
use thiserror::Error;

/// Everything that makes a command fail before producing a result. All of
/// these are input errors from the caller's point of view.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("writing {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Simulate(#[from] SimError),
    #[error("{0}")]
    Usage(String),
}
