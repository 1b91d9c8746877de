use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("matrix is singular (pivot {pivot})")]
    Singular { pivot: usize },

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("invalid network spec: {0}")]
    Spec(String),

    #[error("solver failed on case {index}: {source}")]
    CaseFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("zero variance for output variable {0}")]
    ZeroVariance(String),

    #[error("training split is empty")]
    EmptySplit,

    #[error("true field of sample {0} has zero norm")]
    ZeroNormTruth(usize),

    #[error("loss {loss} requires {what}")]
    MissingPhysics {
        loss: &'static str,
        what: &'static str,
    },

    #[error("missing force vector for sample {0}")]
    MissingForce(usize),

    #[error("loss became NaN at epoch {epoch}, batch {batch}")]
    NanLoss { epoch: usize, batch: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that come from the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::CaseFailed { .. }
                | Error::NanLoss { .. }
                | Error::NonFinite(_)
                | Error::ZeroNormTruth(_)
                | Error::ZeroVariance(_)
        )
    }
}
