use std::fmt;
use std::path::Path;

use serde_json::{json, Value};

/// Error surfaced to the user as a JSON object and a class-specific exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub class: &'static str,
    pub message: String,
}

pub const CLASSES: &[(&str, i32)] = &[
    ("config", 3),
    ("dimension", 10),
    ("domain", 11),
    ("parameter", 12),
    ("measure", 13),
    ("coupling", 14),
    ("missing_cell", 15),
    ("infeasible", 16),
    ("unbounded", 17),
    ("convergence", 18),
    ("numeric", 19),
    ("divergence", 20),
    ("csv", 21),
    ("json", 22),
    ("io", 23),
];

impl CliError {
    pub fn new(class: &'static str, message: impl Into<String>) -> Self {
        CliError {
            class,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("config", message)
    }

    pub fn with_path(e: cotdre_core::Error, path: &Path) -> Self {
        CliError::new(e.class(), format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        CLASSES
            .iter()
            .find(|(c, _)| *c == self.class)
            .map_or(1, |(_, code)| *code)
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": { "class": self.class, "message": self.message } })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.class, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<cotdre_core::Error> for CliError {
    fn from(e: cotdre_core::Error) -> Self {
        CliError::new(e.class(), e.to_string())
    }
}
