use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("schema violation: {0}")]
    SchemaViolation(String),

    #[error("unknown item {variable}={category}")]
    UnknownItem { variable: String, category: String },

    #[error("unknown variable {0}")]
    UnknownVariable(String),

    #[error("item id {0} is not in the dictionary")]
    InvalidItem(u32),

    #[error("item id {0} appears more than once in the itemset")]
    DuplicateItem(u32),

    #[error("operation requires a non-empty transaction database")]
    EmptyDatabase,

    #[error("confidence is undefined: antecedent never occurs")]
    UndefinedConfidence,

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("response variable {0} has fewer than two classes")]
    DegenerateResponse(String),

    #[error("no variable has positive importance; nothing to select")]
    EmptySelection,

    #[error("{items} items exceed the brute-force enumeration bound of {bound}")]
    TooLargeForOracle { items: usize, bound: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the filesystem rather than of the data or arguments.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
