use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("singular kernel evaluation: target {target:?} coincides with source {source_pos:?} and delta_k = 0")]
    Singularity {
        target: [f64; 2],
        source_pos: [f64; 2],
    },

    #[error("singular 2x2 Jacobian block for particle {particle} (det = {det:e})")]
    SingularBlock { particle: usize, det: f64 },

    #[error("requested rank {requested} exceeds numerical rank {numerical_rank}")]
    RankExceeded {
        requested: usize,
        numerical_rank: usize,
    },

    #[error("rank-deficient sampled residual basis; dependent columns: {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage {
            stage,
            source: Box::new(e),
        }
    }

    /// True for failures caused by the numerics rather than by inputs or I/O.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Singularity { .. }
            | Error::SingularBlock { .. }
            | Error::RankExceeded { .. }
            | Error::RankDeficient { .. }
            | Error::Structural(_) => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}
