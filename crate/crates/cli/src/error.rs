//! Error classes mapped onto the exit-code convention: 2 for bad
//! invocations, 1 for bad data, 70 for faults in the tool itself.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config keys, or parameter values. Exit 2.
    Usage(String),
    /// Unreadable or invalid input data, or a domain precondition the
    /// data fails to meet. Exit 1.
    Data(String),
    /// The tool itself failed: serialization, output writing. Exit 70.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
            CliError::Internal(_) => 70,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Internal(_) => "internal",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => m,
        }
    }

    /// One-line JSON for stderr, so failures stay machine-readable.
    pub fn render(&self) -> String {
        format!(
            "{{\"error\":{{\"class\":{},\"message\":{}}}}}",
            serde_json::to_string(self.class()).expect("static string"),
            serde_json::to_string(self.message()).expect("plain string"),
        )
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.class(), self.message())
    }
}

impl From<econokit_core::error::Error> for CliError {
    fn from(e: econokit_core::error::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(format!("serializing report: {e}"))
    }
}
