use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad user input: flags, spec parameters, window syntax.
    #[error("usage: {0}")]
    Usage(String),

    /// A matrix or result file that does not follow its format.
    #[error("format error in {context}: {message}")]
    Format { context: String, message: String },

    /// Memory budget exceeded. `estimate` is the working-set size that tripped the budget.
    #[error("memory budget of {budget} bytes exceeded (needs about {estimate} bytes)")]
    Resource { estimate: u64, budget: u64 },

    /// Mathematically impossible data: negative Betti numbers, failed greedy decompositions,
    /// identities that do not hold. Usually a bad rank (unlucky prime) or a wrong window.
    #[error("integrity: {0}")]
    Integrity(String),

    /// The requested quantity cannot be determined from the available data.
    #[error("undetermined: {0}")]
    Undetermined(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    pub fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }

    /// Integrity failures map to exit status 1, usage errors to 2.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
