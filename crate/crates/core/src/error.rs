//! Error type shared by every module.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building or stepping a simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad or inconsistent configuration; `key` names the offending entry.
    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// Malformed config text. The message carries the line number.
    #[error("config parse error: {0}")]
    Parse(String),

    /// Invalid geometry: degenerate faces, poor mesh quality, flat surfaces.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A constitutive or compatibility requirement failed.
    #[error("physics error: {0}")]
    Physics(String),

    /// Linear solver breakdown or non-convergence.
    #[error("solver error ({method}): {message}; last residuals {history:?}")]
    Solver {
        method: &'static str,
        message: String,
        history: Vec<f64>,
    },

    /// Caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A time step could not be completed.
    #[error("step {step} at t = {t}: {source}")]
    Step {
        step: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Unreadable output file (VTK/CSV reader).
    #[error("format error in {path}: {message}")]
    Format { path: String, message: String },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Short machine-readable name of the variant (the innermost one for step errors).
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config { .. } => "config",
            Error::Parse(_) => "parse",
            Error::Geometry(_) => "geometry",
            Error::Physics(_) => "physics",
            Error::Solver { .. } => "solver",
            Error::Contract(_) => "contract",
            Error::Step { source, .. } => source.kind(),
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
        }
    }

    /// True for errors caused by user input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::Parse(_) | Error::Io { .. } | Error::Format { .. }
        )
    }
}
