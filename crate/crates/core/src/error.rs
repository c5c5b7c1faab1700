use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid cat map [[{a},{b}],[{c},{d}]]: {reason}")]
    InvalidMap {
        a: i64,
        b: i64,
        c: i64,
        d: i64,
        reason: &'static str,
    },

    #[error("integer overflow computing M^{period}; use a smaller period")]
    Overflow { period: u32 },

    #[error("orbit set is not closed under the map: {0}")]
    Inconsistent(String),

    #[error("topology mismatch: {0}")]
    Topology(String),

    #[error("correlation series does not decay (fitted ratio {ratio:.4})")]
    NonDecaying { ratio: f64 },

    #[error("missing variance entry for relative shift {0}")]
    MissingEntry(usize),

    #[error("quantization convention violated: {0}")]
    Convention(String),

    #[error("memory budget exceeded: need {needed} bytes, budget {budget} bytes")]
    Budget { needed: u64, budget: u64 },

    #[error("time grids do not overlap")]
    DisjointGrids,

    #[error("undefined quantity: {0}")]
    Undefined(String),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("config validation error in `{field}`: {reason}")]
    ConfigField { field: String, reason: String },

    #[error("schema mismatch in {file}: field `{field}`")]
    Schema { file: PathBuf, field: String },

    #[error("report checks failed: {}", .0.join(", "))]
    ChecksFailed(Vec<String>),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether this error stems from user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::InvalidMap { .. }
                | Error::ConfigParse(_)
                | Error::ConfigField { .. }
                | Error::Topology(_)
                | Error::Convention(_)
                | Error::Budget { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
