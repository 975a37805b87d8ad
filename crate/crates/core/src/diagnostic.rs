use std::fmt;

/// A well-formedness finding produced by one of the `validate_*` passes.
///
/// `subject` names what is wrong (a parameter path, a binding index, a view
/// name); `rule` is a short stable label for the violated rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub subject: String,
    pub rule: &'static str,
    pub message: String,
}

impl Diagnostic {
    pub fn new(subject: impl Into<String>, rule: &'static str, message: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            rule,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.subject, self.rule, self.message)
    }
}

/// Joins diagnostics one per line, for error messages.
pub fn render(diagnostics: &[Diagnostic]) -> String {
    diagnostics
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}
