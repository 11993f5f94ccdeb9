use std::path::PathBuf;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, thiserror::Error)]
pub enum DcccError {
    /// A configuration value violates its documented range.
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    /// A config file line could not be understood.
    #[error("config parse error at line {line}: {key}: {reason}")]
    Parse {
        line: usize,
        key: String,
        reason: String,
    },

    /// A computation hit a singularity (zero norm, non-finite value, ...).
    #[error("numerical degeneracy: {0}")]
    Numerical(String),

    /// A caller broke an operation's contract (shape mismatch, bad label, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The epoch cannot run, e.g. clustering produced fewer clusters than P.
    #[error("degenerate epoch: {0}")]
    Degenerate(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, DcccError>;

impl DcccError {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        DcccError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DcccError::Io {
            path: path.into(),
            source,
        }
    }
}
