use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("masked pixel at row {row}, col {col}")]
    MaskedLookup { row: usize, col: usize },

    #[error("lookup failed for keypoint {ordinal} (vertex {vertex}): {source}")]
    KeypointLookup {
        ordinal: usize,
        vertex: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate bounding box (h={h}, w={w})")]
    DegenerateBox { h: f64, w: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("training diverged with lr={lr} (loss {loss:e} at epoch {epoch})")]
    Divergence { lr: f64, loss: f64, epoch: usize },

    #[error("empty dataset: no image/position-map pairs in {0}")]
    EmptyDataset(PathBuf),

    #[error("missing predictions for ids: {0:?}")]
    MissingPredictions(Vec<String>),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse { path: path.into(), message: message.to_string() }
    }
}
