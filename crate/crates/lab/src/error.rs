use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

/// One problem with one config key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldIssue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid config: {}", join(.0))]
    ConfigInvalid(Vec<FieldIssue>),
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: shrinkerlab_core::Error,
    },
    #[error("io error at {path}: {message}")]
    Io { path: String, message: String },
}

fn join(issues: &[FieldIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl LabError {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        LabError::ConfigInvalid(vec![FieldIssue {
            field: field.into(),
            message: message.into(),
        }])
    }

    /// Field names of a `ConfigInvalid` error.
    pub fn fields(&self) -> Vec<&str> {
        match self {
            LabError::ConfigInvalid(issues) => issues.iter().map(|i| i.field.as_str()).collect(),
            _ => Vec::new(),
        }
    }
}

/// Attaches scenario context to core errors.
pub trait Context<T> {
    fn context(self, what: &str) -> Result<T>;
}

impl<T> Context<T> for shrinkerlab_core::Result<T> {
    fn context(self, what: &str) -> Result<T> {
        self.map_err(|source| LabError::Core {
            context: what.to_string(),
            source,
        })
    }
}

pub fn io_err(path: &std::path::Path, e: impl fmt::Display) -> LabError {
    LabError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}
