//! Verification reports.

use serde::{Deserialize, Serialize};

/// Where a target value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Formula,
    Table,
    Mc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    /// Criterion id, e.g. `c5`.
    pub criterion: String,
    /// Measurement name, unique within the report.
    pub name: String,
    pub target: f64,
    pub computed: f64,
    pub tolerance: String,
    pub passed: bool,
    /// Report-only entries never affect the exit status.
    pub gated: bool,
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    /// `|computed − target| ≤ tol`.
    pub fn abs(criterion: &str, name: impl Into<String>, target: f64, computed: f64, tol: f64, provenance: Provenance) -> Self {
        CheckResult {
            criterion: criterion.into(),
            name: name.into(),
            target,
            computed,
            tolerance: format!("abs <= {tol:e}"),
            passed: (computed - target).abs() <= tol,
            gated: true,
            provenance,
            note: None,
        }
    }

    /// `|computed/target − 1| ≤ tol`.
    pub fn rel(criterion: &str, name: impl Into<String>, target: f64, computed: f64, tol: f64, provenance: Provenance) -> Self {
        CheckResult {
            tolerance: format!("rel <= {tol}"),
            passed: (computed / target - 1.0).abs() <= tol,
            ..CheckResult::abs(criterion, name, target, computed, 0.0, provenance)
        }
    }

    /// `lo ≤ computed ≤ hi`; the target is the interval midpoint.
    pub fn within(criterion: &str, name: impl Into<String>, lo: f64, hi: f64, computed: f64, provenance: Provenance) -> Self {
        CheckResult {
            tolerance: format!("in [{lo}, {hi}]"),
            passed: (lo..=hi).contains(&computed),
            ..CheckResult::abs(criterion, name, 0.5 * (lo + hi), computed, 0.0, provenance)
        }
    }

    /// Passes when `holds`; `tolerance` describes the condition.
    pub fn condition(
        criterion: &str,
        name: impl Into<String>,
        target: f64,
        computed: f64,
        tolerance: impl Into<String>,
        holds: bool,
        provenance: Provenance,
    ) -> Self {
        CheckResult {
            tolerance: tolerance.into(),
            passed: holds,
            ..CheckResult::abs(criterion, name, target, computed, 0.0, provenance)
        }
    }

    /// Exploratory value, never gated.
    pub fn report_only(criterion: &str, name: impl Into<String>, computed: f64, note: impl Into<String>) -> Self {
        CheckResult {
            criterion: criterion.into(),
            name: name.into(),
            target: f64::NAN,
            computed,
            tolerance: "report-only".into(),
            passed: true,
            gated: false,
            provenance: Provenance::Mc,
            note: Some(note.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: String,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl VerificationReport {
    pub fn new(suite: impl Into<String>, seed: u64, checks: Vec<CheckResult>) -> Self {
        let passed = checks.iter().filter(|c| c.gated).all(|c| c.passed);
        VerificationReport {
            suite: suite.into(),
            seed,
            checks,
            passed,
        }
    }

    /// Criterion ids in first-appearance order.
    pub fn criteria(&self) -> Vec<String> {
        let mut ids: Vec<String> = Vec::new();
        for c in &self.checks {
            if !ids.contains(&c.criterion) {
                ids.push(c.criterion.clone());
            }
        }
        ids
    }

    pub fn criterion_passed(&self, id: &str) -> bool {
        self.checks.iter().filter(|c| c.criterion == id && c.gated).all(|c| c.passed)
    }

    /// Deterministic JSON rendering (NaN and infinities become `null`).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// One line per criterion followed by its measurements.
    pub fn summary_lines(&self) -> Vec<String> {
        let mut lines = Vec::new();
        for id in self.criteria() {
            let verdict = if self.criterion_passed(&id) { "PASS" } else { "FAIL" };
            lines.push(format!("{verdict} {id}"));
            for c in self.checks.iter().filter(|c| c.criterion == id) {
                let mark = match (c.gated, c.passed) {
                    (false, _) => "info",
                    (true, true) => "ok",
                    (true, false) => "FAIL",
                };
                lines.push(format!(
                    "    [{mark}] {}: computed {:.6} target {:.6} ({})",
                    c.name, c.computed, c.target, c.tolerance
                ));
            }
        }
        lines
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overall_status_ignores_report_only() {
        let checks = vec![
            CheckResult::abs("c1", "a", 1.0, 1.0, 1e-9, Provenance::Table),
            CheckResult::report_only("c10", "b", 3.0, "exploratory"),
        ];
        let r = VerificationReport::new("fast", 1, checks);
        assert!(r.passed);
        let failing = VerificationReport::new("fast", 1, vec![CheckResult::within("c5", "v", 0.9, 1.1, 1.2, Provenance::Mc)]);
        assert!(!failing.passed);
        assert!(!failing.criterion_passed("c5"));
    }

    #[test]
    fn json_is_stable() {
        let r = VerificationReport::new("fast", 7, vec![CheckResult::report_only("c10", "x", 0.25, "n")]);
        assert_eq!(r.to_json(), r.clone().to_json());
        assert!(r.to_json().contains("\"target\": null"));
    }
}
