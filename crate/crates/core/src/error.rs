use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One offending configuration key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "`{}`: {}", self.key, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error:\n{}", format_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error("time step {dt:e} exceeds the CFL limit {limit:e} (cfl = {cfl})")]
    Cfl { dt: f64, limit: f64, cfl: f64 },

    #[error(
        "conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})"
    )]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("non-finite value in field `{field}` at node ({i}, {j}), t = {t}")]
    NonFinite {
        field: String,
        i: usize,
        j: usize,
        t: f64,
    },

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("particle left the domain through a wall: seed {seed}, y = {y}, t = {t}")]
    ParticleEscaped { seed: usize, y: f64, t: f64 },

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
