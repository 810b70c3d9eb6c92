use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ParseError: {0}")]
    Parse(String),

    #[error("UnsupportedFormat: {0}")]
    UnsupportedFormat(String),

    #[error("LabelError: {0}")]
    Label(String),

    #[error("EmptyCorpus: no labeled audio found under {}", .0.display())]
    EmptyCorpus(PathBuf),

    #[error("StratifyError: {0}")]
    Stratify(String),

    #[error("ConfigError: {0}")]
    Config(String),

    #[error("ShapeError in {layer}: {message}")]
    Shape { layer: String, message: String },

    #[error("FitError: {0}")]
    Fit(String),

    #[error("EvalError: {0}")]
    Eval(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(layer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Shape {
            layer: layer.into(),
            message: message.into(),
        }
    }
}
