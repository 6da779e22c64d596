use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use super::flatten::FlatRecord;
use super::record::check_record;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub severity: Severity,
    pub path: String,
    pub code: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev} [{}] {}: {}", self.code, self.path, self.message)
    }
}

/// Findings of a validation or audit run. Conformant iff it holds no errors.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn error(&mut self, path: impl Into<String>, code: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation { severity: Severity::Error, path: path.into(), code: code.into(), message: message.into() });
    }

    pub fn warning(&mut self, path: impl Into<String>, code: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation { severity: Severity::Warning, path: path.into(), code: code.into(), message: message.into() });
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.severity == Severity::Warning)
    }

    pub fn error_count(&self) -> usize {
        self.errors().count()
    }

    pub fn is_conformant(&self) -> bool {
        self.error_count() == 0
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks flattened records. Never fails; every finding lands in the report.
pub fn validate(records: &[FlatRecord]) -> ValidationReport {
    let mut report = ValidationReport::new();
    let mut seen: HashMap<&str, &str> = HashMap::new();
    for rec in records {
        check_record(rec, &mut report);
        if let Some(name) = rec.file_name() {
            if let Some(first) = seen.insert(name, &rec.path) {
                report.error(&rec.path, "duplicate_file_name", format!("file_name {name:?} already used at {first}"));
            }
        }
    }
    report
}
