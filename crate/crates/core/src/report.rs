//! Structured outcome of a numerical check.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    /// A hypothesis of the checked statement did not hold for the input.
    PreconditionFailed,
    /// Finite evidence is consistent with the statement under test.
    Supported,
    /// Finite evidence does not allow a conclusion.
    Inconclusive,
}

impl Verdict {
    pub fn is_failure(self) -> bool {
        matches!(self, Verdict::Fail | Verdict::PreconditionFailed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub seed: u64,
    pub samples: usize,
    pub max_violation: f64,
    pub worst_case: Map<String, Value>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
}

impl VerificationReport {
    pub fn new(check: impl Into<String>, seed: u64) -> Self {
        Self {
            check: check.into(),
            seed,
            samples: 0,
            max_violation: 0.0,
            worst_case: Map::new(),
            verdict: Verdict::Pass,
            violations: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Records a sample's violation; keeps the worst case seen so far.
    ///
    /// Ties keep the earlier sample so aggregation over an ordered sample
    /// list is deterministic.
    pub fn observe(&mut self, violation: f64, case: impl FnOnce() -> Map<String, Value>) {
        self.samples += 1;
        if self.samples == 1 || violation > self.max_violation || violation.is_nan() {
            self.max_violation = violation;
            self.worst_case = case();
        }
    }

    pub fn add_violation(&mut self, msg: impl Into<String>) {
        self.violations.push(msg.into());
    }

    /// Sets PASS/FAIL from `max_violation <= tol`, unless a precondition
    /// failure was already recorded.
    pub fn conclude(mut self, tol: f64) -> Self {
        if self.verdict != Verdict::PreconditionFailed {
            self.verdict = if self.max_violation <= tol && self.violations.is_empty() {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
        }
        self
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{:<32} {:?} samples={} max_violation={:.3e}",
            self.check, self.verdict, self.samples, self.max_violation
        )
    }
}

/// Builds a JSON object from `key => value` pairs.
#[macro_export]
macro_rules! case {
    ($($k:expr => $v:expr),* $(,)?) => {{
        let mut map = serde_json::Map::new();
        $( map.insert($k.to_string(), serde_json::json!($v)); )*
        map
    }};
}
