//! Error types shared across the toolkit.

use thiserror::Error;

/// Result alias for toolkit operations.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// All failure modes the library reports.
///
/// The CLI maps these onto process exit codes: usage errors exit 2, data
/// errors exit 3, dependency errors (missing artifacts, version or
/// fingerprint mismatches) exit 4.
#[derive(Debug, Error)]
pub enum Error {
    /// A required header column is absent from a source table.
    #[error("schema error in {table}: missing required column {column:?}")]
    MissingColumn { table: String, column: String },

    /// A data row failed to parse or violated a row-level invariant.
    #[error("row error at {table} row {row}, field {field:?}: {message}")]
    Row {
        table: String,
        /// 1-based data-row index (header excluded).
        row: usize,
        field: String,
        message: String,
    },

    /// Strict mode aborted on the first rejected row.
    #[error("strict mode: {0}")]
    Strict(Box<Error>),

    /// The caller violated an operation precondition.
    #[error("usage error: {0}")]
    Usage(String),

    /// Data-dependent failure outside any single row (orphans, class counts).
    #[error("data error: {0}")]
    Data(String),

    /// A persisted document carries an unsupported format version.
    #[error("version mismatch in {path}: found {found:?}, expected {expected}")]
    VersionMismatch {
        path: String,
        found: String,
        expected: u32,
    },

    /// A model was applied against data built with a different FitState.
    #[error("fingerprint mismatch: model was trained against FitState {expected}, got {actual}")]
    FingerprintMismatch { expected: String, actual: String },

    /// A persisted document is structurally unreadable.
    #[error("corrupt document {path}: {message}")]
    Corrupt { path: String, message: String },

    /// A pipeline stage is missing an artifact a prior stage should have produced.
    #[error("dependency error: missing artifact {0}")]
    MissingArtifact(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn row(table: &str, row: usize, field: &str, message: impl Into<String>) -> Self {
        Error::Row {
            table: table.to_string(),
            row,
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
