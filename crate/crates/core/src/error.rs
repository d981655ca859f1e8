use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Variances (or cutoffs) are not strictly decreasing along the family.
    #[error("ordering violated: {0}")]
    Ordering(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("kernel window for bandwidth index {index} has zero total weight")]
    EmptyWindow { index: usize },

    #[error("length mismatch: expected {expected}, got {actual} ({what})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("no feasible threshold for step {step} below {ceiling}")]
    Bracket { step: usize, ceiling: f64 },

    #[error("risk is not monotone in the threshold at step {step} (sample contains NaN?)")]
    NonMonotone { step: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("no index satisfies the bias-variance balance relation")]
    Balance,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch {
            what,
            expected,
            actual,
        });
    }
    Ok(())
}
