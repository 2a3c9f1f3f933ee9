use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("layer {layer}: expected input with {expected} columns, got {actual}")]
    LayerDimension {
        layer: usize,
        expected: usize,
        actual: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("forward cache does not match parameters: {0}")]
    StaleCache(String),

    #[error("probability {value} outside [0, 1]")]
    Probability { value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("data: {0}")]
    Data(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error(
        "GAN for class {class_id} diverged at iteration {iteration}; last losses D: {:?}, G: {:?}",
        disc_trace.iter().rev().take(5).rev().collect::<Vec<_>>(),
        gen_trace.iter().rev().take(5).rev().collect::<Vec<_>>()
    )]
    GanDiverged {
        class_id: usize,
        iteration: usize,
        disc_trace: Vec<f64>,
        gen_trace: Vec<f64>,
    },

    #[error("checksum mismatch for {}: expected {expected}, actual {actual}", path.display())]
    Checksum {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("download of {url} failed: {msg}")]
    Download { url: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
