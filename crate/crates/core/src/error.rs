use thiserror::Error;

use crate::matches::PlayerId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid player id {0:?}")]
    InvalidPlayerId(String),

    #[error("invalid match: {0}")]
    InvalidMatch(String),

    #[error("cannot split into {units} time units: {reason}")]
    Split { units: usize, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("unknown player {0}")]
    UnknownPlayer(PlayerId),

    #[error("no embedding row for player {0}")]
    MissingEmbedding(PlayerId),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("vector lengths differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),

    #[error("top and bottom benchmark embeddings are orthogonal")]
    OrthogonalBenchmarks,

    #[error("walk corpus is empty")]
    EmptyCorpus,

    #[error("test period has no matches")]
    EmptyTestSet,

    #[error("{0}")]
    InsufficientData(String),

    #[error("infeasible synthetic spec: {0}")]
    Infeasible(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn file(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::File {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

/// Attaches a pipeline stage label to an error.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
