use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument fell outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value violates a precondition. `param` names the offender.
    #[error("configuration error in `{param}`: {message}")]
    Config { param: String, message: String },

    #[error("parse error in `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("landmark mismatch: {0}")]
    Mismatch(String),

    #[error("planning error: {0}")]
    Planning(String),

    #[error("subject `{subject}` failed on job {job}: {source}")]
    Job {
        subject: String,
        job: String,
        #[source]
        source: Box<Error>,
    },

    #[error("missing landmark sidecar for image {0}")]
    MissingSidecar(PathBuf),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error at {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("manifest error: {0}")]
    Manifest(String),
}

impl Error {
    pub(crate) fn config(param: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            param: param.into(),
            message: message.into(),
        }
    }

    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
