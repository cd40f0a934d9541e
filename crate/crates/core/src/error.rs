use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid architecture config: {0}")]
    InvalidArch(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("weight store: {0}")]
    Weights(String),

    #[error("invalid class map: {0}")]
    ClassMap(String),

    #[error("label color {color:?} is not registered in the class map ({count} pixels)")]
    UnknownColor { color: [u8; 3], count: usize },

    #[error("class index {index} out of range for {n_classes} classes")]
    ClassIndex { index: u32, n_classes: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("training: {0}")]
    Train(String),

    #[error("task config: {0}")]
    Task(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),

    #[error("safetensors: {0}")]
    SafeTensors(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image {
            path: path.into(),
            source,
        }
    }
}
