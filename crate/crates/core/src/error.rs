use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bad magic in {context}: expected {expected}, found {actual}")]
    Magic {
        context: String,
        expected: String,
        actual: String,
    },
    #[error("unsupported {context} version {found} (this build reads version {supported})")]
    Version {
        context: String,
        found: u8,
        supported: u8,
    },
    #[error("length error in {context}: {detail}")]
    Length { context: String, detail: String },
    #[error("format error in {context}: {detail}")]
    Format { context: String, detail: String },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("non-finite activation at layer {layer} ({kind})")]
    Numeric { layer: usize, kind: String },
    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Divergence {
        epoch: usize,
        batch: usize,
        detail: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed or unreadable data.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Magic { .. }
                | Error::Version { .. }
                | Error::Length { .. }
                | Error::Format { .. }
                | Error::Dimension(_)
                | Error::Empty(_)
                | Error::Io { .. }
        )
    }

    /// True for numeric failures (divergence, non-finite activations).
    pub fn is_numeric_error(&self) -> bool {
        matches!(
            self,
            Error::Numeric { .. } | Error::Divergence { .. } | Error::NonFinite(_)
        )
    }
}
