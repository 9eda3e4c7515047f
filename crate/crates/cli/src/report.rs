use serde::Serialize;

use crate::config::JobKind;
use crate::output::Artifact;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// `value ≤ bound`
    AtMost,
    /// `value ≥ bound`
    AtLeast,
    /// `|value − target| ≤ bound`
    Near,
    /// `|value − target| ≤ bound·|target|`
    RelNear,
    /// `value` is 1 (true) or 0 (false).
    Holds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub relation: Relation,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    pub bound: f64,
}

impl Check {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Check { name: name.into(), passed: value <= bound, relation: Relation::AtMost, value, target: None, bound }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Check { name: name.into(), passed: value >= bound, relation: Relation::AtLeast, value, target: None, bound }
    }

    pub fn near(name: &str, value: f64, target: f64, tol: f64) -> Self {
        Check { name: name.into(), passed: (value - target).abs() <= tol, relation: Relation::Near, value, target: Some(target), bound: tol }
    }

    pub fn rel_near(name: &str, value: f64, target: f64, tol: f64) -> Self {
        let passed = (value - target).abs() <= tol * target.abs();
        Check { name: name.into(), passed, relation: Relation::RelNear, value, target: Some(target), bound: tol }
    }

    pub fn holds(name: &str, ok: bool) -> Self {
        Check { name: name.into(), passed: ok, relation: Relation::Holds, value: ok as u8 as f64, target: None, bound: 1.0 }
    }
}

/// A numeric failure that stopped one stage of a job.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub stage: String,
    pub error: String,
}

/// Contents of `report.json`. Wall time goes to stderr so that the file depends only
/// on the configuration and seed.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub job: JobKind,
    pub system: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub failures: Vec<Failure>,
    pub results: serde_json::Map<String, serde_json::Value>,
    pub artifacts: Vec<Artifact>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_never_passes() {
        assert!(!Check::at_most("a", f64::NAN, 1.0).passed);
        assert!(!Check::at_least("a", f64::NAN, 1.0).passed);
        assert!(!Check::near("a", f64::NAN, 1.0, 1.0).passed);
        assert!(!Check::rel_near("a", f64::NAN, 1.0, 1.0).passed);
    }

    #[test]
    fn relations() {
        assert!(Check::near("a", 1.01, 1.0, 0.02).passed);
        assert!(!Check::rel_near("a", 2.2, 2.0, 0.05).passed);
        assert!(Check::rel_near("a", 2.05, 2.0, 0.05).passed);
        assert_eq!(Check::holds("a", true).value, 1.0);
    }
}
