use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed JSON or a missing/mistyped field; `field` is the JSON path
    /// of the offending value.
    #[error("{}: invalid value at `{field}`: {message}", path.display())]
    Parse {
        path: PathBuf,
        field: String,
        message: String,
    },

    #[error("invalid data: {0}")]
    Invariant(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("curve is not sorted by nondecreasing {axis} at point {index}")]
    UnsortedCurve { axis: &'static str, index: usize },

    #[error("rankings contain different detectors: {0}")]
    RankingMismatch(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
