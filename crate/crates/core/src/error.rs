use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value outside its documented range; `path` names the offending field.
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },

    #[error(
        "unstable time step: dt * max|Omega| = {:.4} exceeds {limit} (dt = {dt} ns, max|Omega| = {max_rabi:.6} rad/ns); \
         use dt <= {required_dt:.6} ns",
        dt * max_rabi,
        limit = crate::atom::STABILITY_LIMIT
    )]
    Stability {
        dt: f64,
        max_rabi: f64,
        required_dt: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("scan point {param} failed: {source}")]
    ScanPoint {
        param: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

/// Exit-code classes of the command-line driver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Prefix the field path of a validation error, e.g. `density` -> `medium.density`.
    pub fn within(self, parent: &str) -> Self {
        match self {
            Error::Invalid { path, message } => Error::Invalid {
                path: format!("{parent}.{path}"),
                message,
            },
            other => other,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Invalid { .. } | Error::Parse { .. } => ErrorKind::Validation,
            Error::Stability { .. } | Error::Numerical(_) => ErrorKind::Numerical,
            Error::Io { .. } => ErrorKind::Io,
            Error::ScanPoint { source, .. } => source.kind(),
        }
    }
}
