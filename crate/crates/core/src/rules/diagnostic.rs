use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// A parse or validation finding. Errors block activation of a rule base;
/// warnings are informational.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub line: usize,
    pub column: usize,
    pub rule_id: Option<usize>,
}

impl Diagnostic {
    pub fn error(message: impl Into<String>, line: usize, column: usize) -> Self {
        Self { severity: Severity::Error, message: message.into(), line, column, rule_id: None }
    }

    pub fn warning(message: impl Into<String>, line: usize, column: usize) -> Self {
        Self { severity: Severity::Warning, message: message.into(), line, column, rule_id: None }
    }

    pub fn for_rule(mut self, id: usize) -> Self {
        self.rule_id = Some(id);
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{kind}: {}:{}", self.line, self.column)?;
        if let Some(id) = self.rule_id {
            write!(f, " (rule {id})")?;
        }
        write!(f, ": {}", self.message)
    }
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(Diagnostic::is_error)
}
