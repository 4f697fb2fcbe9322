use std::path::PathBuf;

/// Errors raised across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument fell outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller broke an interface contract (dimension mismatch and similar).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The integrator produced a non-finite value or left the terrain.
    #[error("simulation fault: {0}")]
    SimulationFault(String),

    /// Invalid configuration, regimen name, or missing prerequisite.
    #[error("configuration error: {0}")]
    Config(String),

    /// A loss or gradient became non-finite during an update.
    #[error("optimization fault: {0}")]
    Optimization(String),

    /// A file did not match its expected format.
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
