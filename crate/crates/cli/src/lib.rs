//! Experiment runner around `favard-core`: structured configs, reproducible
//! CSV/JSON emission, and a worker pool whose size never affects output
//! bytes.

pub mod config;
pub mod emit;
pub mod run;

use std::fmt;

/// Exit status contract: 0 success, 2 config error, 3 resource guard,
/// 4 model-invalid.
#[derive(Debug, Clone)]
pub struct CliError {
    pub code: i32,
    pub kind: String,
    pub messages: Vec<String>,
}

impl CliError {
    pub fn config(messages: Vec<String>) -> CliError {
        CliError {
            code: 2,
            kind: "config".into(),
            messages,
        }
    }

    pub fn io(message: String) -> CliError {
        CliError {
            code: 2,
            kind: "io".into(),
            messages: vec![message],
        }
    }

    /// Machine-readable error record (one JSON object on stderr).
    pub fn record(&self) -> String {
        let msgs: Vec<serde_json::Value> = self
            .messages
            .iter()
            .map(|m| serde_json::Value::String(m.clone()))
            .collect();
        serde_json::json!({
            "error": {
                "code": self.code,
                "kind": self.kind,
                "messages": msgs,
            }
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (exit {}): {}", self.kind, self.code, self.messages.join("; "))
    }
}

impl std::error::Error for CliError {}

impl From<favard_core::Error> for CliError {
    fn from(e: favard_core::Error) -> CliError {
        let code = match &e {
            favard_core::Error::Parameter(_)
            | favard_core::Error::Unsupported(_)
            | favard_core::Error::DegenerateModel(_) => 2,
            favard_core::Error::ResourceGuard(_) => 3,
            favard_core::Error::InvalidModel(_) => 4,
        };
        CliError {
            code,
            kind: e.kind_str().into(),
            messages: vec![e.message().into()],
        }
    }
}
