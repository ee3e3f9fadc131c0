use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::span::{LineIndex, Span};

/// Stable diagnostic codes.
pub mod codes {
    pub const LEX: &str = "LEX";
    pub const SYNTAX: &str = "SYNTAX";
    pub const INDENT: &str = "INDENT";
    pub const UNTERMINATED_BLOCK: &str = "UNTERMINATED_BLOCK";
    pub const NO_EGO: &str = "NO_EGO";
    pub const DUPLICATE_EGO: &str = "DUPLICATE_EGO";
    pub const DUPLICATE_NAME: &str = "DUPLICATE_NAME";
    pub const DUPLICATE_SPECIFIER: &str = "DUPLICATE_SPECIFIER";
    pub const MULTIPLE_MODELS: &str = "MULTIPLE_MODELS";

    pub const CATALOG_UNKNOWN_CLASS: &str = "CATALOG_UNKNOWN_CLASS";
    pub const CATALOG_UNKNOWN_BEHAVIOR: &str = "CATALOG_UNKNOWN_BEHAVIOR";
    pub const CATALOG_UNKNOWN_WEATHER: &str = "CATALOG_UNKNOWN_WEATHER";
    pub const CATALOG_UNKNOWN_PARAM: &str = "CATALOG_UNKNOWN_PARAM";
    pub const CATALOG_UNKNOWN_SPECIFIER: &str = "CATALOG_UNKNOWN_SPECIFIER";
    pub const BEHAVIOR_ARITY: &str = "BEHAVIOR_ARITY";
    pub const UNRESOLVED_NAME: &str = "UNRESOLVED_NAME";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// Serialized as one flat JSON object per diagnostic; the byte span is kept
/// in memory only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: String,
    pub severity: Severity,
    pub line: usize,
    pub col: usize,
    pub end_line: usize,
    pub end_col: usize,
    pub message: String,
    pub hint: Option<String>,
    #[serde(skip)]
    pub span: Span,
}

impl Diagnostic {
    pub fn error(code: &str, span: Span, message: impl Into<String>, source: &str) -> Self {
        Self::with_severity(Severity::Error, code, span, message.into(), source)
    }

    fn with_severity(
        severity: Severity,
        code: &str,
        span: Span,
        message: String,
        source: &str,
    ) -> Self {
        let span = span.clamp(source.len());
        let index = LineIndex::new(source);
        let (line, col) = index.line_col(span.start);
        let (end_line, end_col) = index.line_col(span.end);
        Diagnostic {
            code: code.into(),
            severity,
            line,
            col,
            end_line,
            end_col,
            message,
            hint: None,
            span,
        }
    }

    pub fn with_hint(mut self, hint: impl Into<String>) -> Self {
        self.hint = Some(hint.into());
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl core::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}[{}]: {}", self.line, self.col, self.code, self.message)?;
        if let Some(hint) = &self.hint {
            write!(f, " (hint: {hint})")?;
        }
        Ok(())
    }
}
