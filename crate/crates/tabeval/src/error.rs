use std::path::PathBuf;
use thiserror::Error;

/// Crate-wide error type.
///
/// Variants map onto the CLI exit codes: configuration and usage problems
/// exit 1, dataset and input integrity problems exit 2, everything else
/// exits 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid format error{}: line {line}, column {column}: {message}", path_suffix(.path))]
    GridFormat {
        path: Option<PathBuf>,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid grid{}: {message}", path_suffix(.path))]
    InvalidGrid {
        path: Option<PathBuf>,
        message: String,
    },

    #[error("lexical error in SQL: {0}")]
    Lexical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dataset integrity error: {0}")]
    DatasetIntegrity(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("sqlite error: {0}")]
    Sqlite(#[from] rusqlite::Error),

    #[error("io error{}: {source}", path_suffix(.path))]
    Io {
        path: Option<PathBuf>,
        #[source]
        source: std::io::Error,
    },

    #[error("json error{}: {source}", path_suffix(.path))]
    Json {
        path: Option<PathBuf>,
        #[source]
        source: serde_json::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

fn path_suffix(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!(" in {}", p.display()),
        None => String::new(),
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: Some(path.into()),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: Some(path.into()),
            source,
        }
    }

    /// Process exit code for this error per the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::GridFormat { .. }
            | Error::InvalidGrid { .. }
            | Error::DatasetIntegrity(_)
            | Error::UndefinedMetric(_)
            | Error::Lexical(_) => 2,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(source: std::io::Error) -> Self {
        Error::Io { path: None, source }
    }
}

impl From<serde_json::Error> for Error {
    fn from(source: serde_json::Error) -> Self {
        Error::Json { path: None, source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
