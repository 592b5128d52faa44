//! Machine-readable check reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const TOOL: &str = "bloch";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Info,
}

/// Whether a numeric claim is a rigorous bound or identity, or an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Certified,
    Heuristic,
}

/// One check. `margin` is `tolerance - worst excess`, so a check passes
/// iff its margin is nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub provenance: Provenance,
    pub tolerance: Option<f64>,
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub witnesses: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Certified check of `worst_excess <= tolerance`.
    pub fn bound(name: impl Into<String>, tolerance: f64, worst_excess: f64) -> Check {
        let margin = tolerance - worst_excess;
        Check {
            name: name.into(),
            status: if margin >= 0.0 { Status::Pass } else { Status::Fail },
            provenance: Provenance::Certified,
            tolerance: Some(tolerance),
            margin: Some(margin),
            witnesses: Value::Null,
            detail: None,
        }
    }

    pub fn info(name: impl Into<String>, witnesses: Value) -> Check {
        Check {
            name: name.into(),
            status: Status::Info,
            provenance: Provenance::Heuristic,
            tolerance: None,
            margin: None,
            witnesses,
            detail: None,
        }
    }

    /// A check that could not run; counted as a certified failure.
    pub fn error(name: impl Into<String>, err: impl std::fmt::Display) -> Check {
        Check {
            name: name.into(),
            status: Status::Fail,
            provenance: Provenance::Certified,
            tolerance: None,
            margin: None,
            witnesses: Value::Null,
            detail: Some(err.to_string()),
        }
    }

    pub fn heuristic(mut self) -> Check {
        self.provenance = Provenance::Heuristic;
        self
    }

    pub fn with_witnesses(mut self, w: Value) -> Check {
        self.witnesses = w;
        self
    }

    pub fn with_detail(mut self, d: impl Into<String>) -> Check {
        self.detail = Some(d.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub info: usize,
    /// Failures among certified checks; these decide the exit status.
    pub certified_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub scenario: Value,
    pub checks: Vec<Check>,
    pub summary: Summary,
    /// Wall-clock seconds; the only field allowed to differ between runs.
    pub timing_seconds: Option<f64>,
}

impl Report {
    pub fn new(version: &str, seed: u64, scenario: Value, mut checks: Vec<Check>) -> Report {
        checks.sort_by(|a, b| a.name.cmp(&b.name));
        let mut summary = Summary::default();
        for c in &checks {
            match c.status {
                Status::Pass => summary.pass += 1,
                Status::Info => summary.info += 1,
                Status::Fail => {
                    summary.fail += 1;
                    if c.provenance == Provenance::Certified {
                        summary.certified_failures += 1;
                    }
                }
            }
        }
        Report { tool: TOOL.into(), version: version.into(), seed, scenario, checks, summary, timing_seconds: None }
    }

    pub fn ok(&self) -> bool {
        self.summary.certified_failures == 0
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// The report without its timing, as compact JSON.
    pub fn payload(&self) -> String {
        let mut r = self.clone();
        r.timing_seconds = None;
        serde_json::to_string(&r).expect("report serializes")
    }
}

/// Per-check tolerance overrides keyed by check name (or any key a check
/// documents).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tolerances(pub BTreeMap<String, f64>);

impl Tolerances {
    pub fn get(&self, key: &str, default: f64) -> f64 {
        self.0.get(key).copied().unwrap_or(default)
    }

    /// Parses `key=value`.
    pub fn insert_pair(&mut self, pair: &str) -> Result<(), String> {
        let (k, v) = pair.split_once('=').ok_or_else(|| format!("expected key=value, got {pair:?}"))?;
        let v: f64 = v.trim().parse().map_err(|e| format!("tolerance {k}: {e}"))?;
        if !(v >= 0.0) {
            return Err(format!("tolerance {k} must be nonnegative"));
        }
        self.0.insert(k.trim().to_string(), v);
        Ok(())
    }
}
