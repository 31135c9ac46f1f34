use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),

    #[error("not a permutation: {0}")]
    NotAPermutation(String),

    #[error("bad magic in KMAT file")]
    BadMagic,

    #[error("unsupported KMAT version {0:?}")]
    UnsupportedVersion(String),

    #[error("truncated KMAT payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("eigensolver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("rank-deficient landmark block (numerical rank {rank})")]
    RankDeficient { rank: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("empty index set")]
    EmptySet,

    #[error("level {level} out of range for tree of depth {depth}")]
    LevelOutOfRange { level: usize, depth: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Wraps an error with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for failures of the numerics (as opposed to usage or I/O).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NoConvergence { .. }
            | Error::RankDeficient { .. }
            | Error::Degenerate(_)
            | Error::NonFinite(_) => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
