//! Crate-wide error type and pipeline stage labels.

use thiserror::Error;

/// Pipeline stage a failure originated from. Used to label errors raised
/// while orchestrating a full run so the CLI can report where things broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Affinity,
    Dynamics,
    Metrics,
    Io,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Affinity => "affinity",
            Stage::Dynamics => "dynamics",
            Stage::Metrics => "metrics",
            Stage::Io => "io",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is out of range or inconsistent.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// The input data violates an invariant (non-finite values, isolated
    /// points, count mismatches, ...).
    #[error("data error: {0}")]
    Data(String),

    /// A delimited text file failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A binary file has the wrong magic number or a malformed layout.
    #[error("format error: {0}")]
    Format(String),

    /// An embedding coordinate became non-finite during iteration.
    #[error("numerical blowup at iteration {iteration}: point {point} is non-finite")]
    NumericalBlowup { iteration: usize, point: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Error wrapped with the pipeline stage it occurred in.
    #[error("[{stage}] {source}")]
    Staged {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps the error with a stage label, unless it already carries one.
    pub fn in_stage(self, stage: Stage) -> Error {
        match self {
            Error::Staged { .. } => self,
            other => Error::Staged {
                stage,
                source: Box::new(other),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
