use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

/// Whether a failed check is a hard failure or only a warning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    /// Bound violations and algebraic identities.
    Hard,
    /// Discretization accuracy and statistical checks.
    Soft,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    pub severity: Severity,
    pub measured: f64,
    pub tolerance: f64,
    pub runtime: f64,
    pub detail: String,
}

impl CheckResult {
    pub fn new(name: &str, severity: Severity, ok: bool, measured: f64, tolerance: f64) -> Self {
        let status = match (ok, severity) {
            (true, _) => Status::Pass,
            (false, Severity::Hard) => Status::Fail,
            (false, Severity::Soft) => Status::Warn,
        };
        Self {
            name: name.to_string(),
            status,
            severity,
            measured,
            tolerance,
            runtime: 0.0,
            detail: String::new(),
        }
    }

    /// Passes when `measured <= tolerance`.
    pub fn at_most(name: &str, severity: Severity, measured: f64, tolerance: f64) -> Self {
        Self::new(name, severity, measured <= tolerance, measured, tolerance)
    }

    /// Passes when `measured >= tolerance`.
    pub fn at_least(name: &str, severity: Severity, measured: f64, tolerance: f64) -> Self {
        Self::new(name, severity, measured >= tolerance, measured, tolerance)
    }

    /// A check that could not run; hard checks fail, soft checks warn.
    pub fn errored(name: &str, severity: Severity, err: &Error) -> Self {
        let mut c = Self::new(name, severity, false, f64::NAN, f64::NAN);
        c.detail = format!("error: {err}");
        c
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Named check results, ordered by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerificationReport {
    pub entries: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn push(&mut self, entry: CheckResult) {
        self.entries.push(entry);
    }

    pub fn extend(&mut self, entries: impl IntoIterator<Item = CheckResult>) {
        self.entries.extend(entries);
    }

    /// Sorts by name and rejects duplicates.
    pub fn finish(mut self) -> Result<Self> {
        self.entries.sort_by(|a, b| a.name.cmp(&b.name));
        if let Some(w) = self.entries.windows(2).find(|w| w[0].name == w[1].name) {
            return Err(Error::Integrity(format!("check `{}` reported twice", w[0].name)));
        }
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn count(&self, status: Status) -> usize {
        self.entries.iter().filter(|e| e.status == status).count()
    }

    /// True when nothing failed, and with `strict` nothing warned either.
    pub fn success(&self, strict: bool) -> bool {
        self.count(Status::Fail) == 0 && (!strict || self.count(Status::Warn) == 0)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Integrity(e.to_string()))
    }

    /// A fixed-width table for terminals.
    pub fn table(&self) -> String {
        let width = self
            .entries
            .iter()
            .map(|e| e.name.len())
            .max()
            .unwrap_or(4)
            .max(4);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:<6}  {:>12}  {:>12}  {:>8}  detail",
            "name", "status", "measured", "tolerance", "time_s"
        );
        for e in &self.entries {
            let status = match e.status {
                Status::Pass => "pass",
                Status::Warn => "WARN",
                Status::Fail => "FAIL",
            };
            let _ = writeln!(
                out,
                "{:<width$}  {:<6}  {:>12.4e}  {:>12.4e}  {:>8.2}  {}",
                e.name, status, e.measured, e.tolerance, e.runtime, e.detail
            );
        }
        let _ = writeln!(
            out,
            "{} pass, {} warn, {} fail",
            self.count(Status::Pass),
            self.count(Status::Warn),
            self.count(Status::Fail)
        );
        out
    }
}
