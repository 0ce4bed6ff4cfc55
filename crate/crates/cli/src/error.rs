//! Exit statuses and diagnostics.

use serde::Serialize;

/// 1 for assertion failures, 2 for input errors.
#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub line: Option<usize>,
    #[serde(skip)]
    pub status: i32,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            kind: "input",
            message: message.into(),
            line: None,
            status: 2,
        }
    }

    pub fn input_at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            ..Self::input(message)
        }
    }

    pub fn assertion(message: impl Into<String>) -> Self {
        Self {
            kind: "assertion",
            message: message.into(),
            line: None,
            status: 1,
        }
    }

    #[must_use]
    pub fn diagnostic(&self) -> String {
        serde_json::to_string(&serde_json::json!({ "error": self })).expect("diagnostic serializes")
    }
}

impl From<harmstrat::Error> for CliError {
    fn from(e: harmstrat::Error) -> Self {
        use harmstrat::Error as E;
        match e {
            E::Parse { line, message } => Self::input_at(line, message),
            E::DecayViolation { .. } => Self::assertion(e.to_string()),
            other => Self::input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::input(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}
