use std::path::PathBuf;

use thiserror::Error;

/// Every failure the engine can report.
///
/// Variants are grouped into coarse [`ErrorKind`]s so that front ends can map
/// them onto stable exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate box: width {width}, height {height}")]
    DegenerateBox { width: f64, height: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("embedding file {path}: {message}")]
    EmbeddingFormat { path: PathBuf, message: String },

    #[error("frame {got} does not follow frame {last}")]
    Sequencing { last: i64, got: i64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("scenario validation failed: {}", .0.join("; "))]
    Scenario(Vec<String>),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Config,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Numerical(_) => ErrorKind::Numerical,
            Error::Config(_) | Error::Scenario(_) => ErrorKind::Config,
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Input,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
