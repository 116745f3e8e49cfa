//! Machine-readable report wrapper shared by all subcommands.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use formdom::{Tolerances, Verdict, VerificationReport};

use crate::RunArgs;

#[derive(Debug, Serialize)]
pub struct Envelope {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub samples: usize,
    pub t_grid: Vec<f64>,
    pub tolerances: Tolerances,
    /// SHA-256 of each input file, keyed by role.
    pub inputs: BTreeMap<&'static str, String>,
    pub verdict: Verdict,
    /// Sorted by check name.
    pub reports: Vec<VerificationReport>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Envelope {
    pub fn new(command: &'static str, run: &RunArgs, tolerances: Tolerances) -> Self {
        Self {
            tool: "formdom",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: run.seed,
            samples: run.samples,
            t_grid: run.t_grid.clone(),
            tolerances,
            inputs: BTreeMap::new(),
            verdict: Verdict::Pass,
            reports: Vec::new(),
            extra: Map::new(),
        }
    }

    pub fn add_input(&mut self, role: &'static str, bytes: &[u8]) {
        self.inputs.insert(role, hex::encode(Sha256::digest(bytes)));
    }

    /// Sorts reports and derives the overall verdict: FAIL if any report
    /// failed, PASS otherwise.
    pub fn finish(mut self) -> Self {
        self.reports.sort_by(|a, b| a.check.cmp(&b.check));
        if self.reports.iter().any(|r| r.verdict.is_failure()) {
            self.verdict = Verdict::Fail;
        }
        self
    }

    pub fn print_summary(&self) {
        for r in &self.reports {
            eprintln!("{}", r.summary_line());
            if r.verdict.is_failure() && !r.worst_case.is_empty() {
                eprintln!("  worst case: {}", Value::Object(r.worst_case.clone()));
            }
            for v in &r.violations {
                eprintln!("  {v}");
            }
        }
    }

    /// Pretty JSON to `path`, or stdout when no path is given.
    pub fn emit(&self, path: Option<&Path>) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        match path {
            Some(p) => std::fs::write(p, text + "\n")
                .with_context(|| format!("writing {}", p.display()))?,
            None => println!("{text}"),
        }
        Ok(())
    }
}

pub fn read_input(path: &Path) -> anyhow::Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}
