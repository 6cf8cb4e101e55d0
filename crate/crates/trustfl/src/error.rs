use std::path::PathBuf;

use trustfl_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("output directory {path} is not writable: {reason}")]
    Unwritable { path: PathBuf, reason: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("plot: {0}")]
    Plot(String),

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn config(key: &str, message: &str) -> Self {
        CliError::Config {
            key: key.to_owned(),
            message: message.to_owned(),
        }
    }

    /// Attaches a config key to validation failures from the core crate.
    pub fn from_core(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter { name, reason } => CliError::config(name, &reason),
            CoreError::TooFewClients(_) => CliError::config("topology.clients", &e.to_string()),
            CoreError::TooManyByzantine { .. } => CliError::config("topology.byzantine", &e.to_string()),
            CoreError::HonestSubgraphDisconnected => CliError::config("topology", &e.to_string()),
            CoreError::InvalidEdge(..) | CoreError::UnknownClient(_) => {
                CliError::config("topology.edges", &e.to_string())
            }
            other => CliError::Core(other),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
