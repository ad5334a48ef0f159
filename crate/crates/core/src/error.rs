use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the function it was passed to.
    #[error("domain error: {0}")]
    Domain(String),

    /// The inverse mean-resultant function was asked for a value at or beyond
    /// the cap, which happens when the data are numerically coincident.
    #[error("concentration diverges: mean resultant length {r} is at or above the cap {cap}")]
    CappedConcentration { r: f64, cap: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A vector is too far from unit length to be renormalized silently.
    #[error("vector norm {norm} is not within {tolerance} of 1")]
    NotUnit { norm: f64, tolerance: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    /// Training data that cannot support a well-defined update.
    #[error("degenerate training data: {0}")]
    Degenerate(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Data-level problems found while loading or joining files (bad rows,
    /// unknown or duplicate identifiers).
    #[error("{0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
