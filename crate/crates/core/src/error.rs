use thiserror::Error;

pub type Result<T, E = PufError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PufError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A CDC component produced no selected challenges; one line per component.
    #[error("empty dataset: {}", .diagnostics.join("; "))]
    EmptyDataset { diagnostics: Vec<String> },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error(transparent)]
    Decode(#[from] DecodeError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PufError {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        PufError::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        PufError::InvalidConfig(msg.into())
    }
}

/// Failures while reading a binary dataset or model file.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("bad magic")]
    BadMagic,

    #[error("unsupported format version {found:?}")]
    VersionMismatch { found: u8 },

    #[error("truncated {what}")]
    Truncated { what: &'static str },

    #[error("header declares {header} records but file holds {actual}")]
    CountMismatch { header: u64, actual: u64 },

    #[error("malformed header: {0}")]
    Header(String),
}
