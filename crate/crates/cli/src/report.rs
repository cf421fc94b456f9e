use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use serde::Serialize;
use serde_json::Value;

/// An asserted inequality, evaluated when the report is built.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    /// `value <= bound + slack`.
    pub fn at_most(name: &str, value: f64, bound: f64, slack: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound,
            passed: value <= bound + slack,
        }
    }

    /// `|value - target| <= slack`.
    pub fn near(name: &str, value: f64, target: f64, slack: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound: target,
            passed: (value - target).abs() <= slack,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub config: Value,
    pub metrics: Value,
    pub checks: Vec<Check>,
    pub all_passed: bool,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn new(command: &str, seed: Option<u64>, config: Value, metrics: Value, checks: Vec<Check>, start: Instant) -> Self {
        RunReport {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config,
            metrics,
            all_passed: checks.iter().all(|c| c.passed),
            checks,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        }
    }

    pub fn summary(&self) -> String {
        let mut s = match self.seed {
            Some(seed) => format!("{} (seed {seed})\n", self.command),
            None => format!("{}\n", self.command),
        };
        for c in &self.checks {
            let verdict = if c.passed { "pass" } else { "FAIL" };
            s += &format!("  [{verdict}] {}: {} vs {}\n", c.name, c.value, c.bound);
        }
        s
    }

    pub const CSV_HEADER: &'static str = "command,seed,check,value,bound,passed";

    pub fn csv_rows(&self) -> Vec<String> {
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_default();
        self.checks
            .iter()
            .map(|c| format!("{},{seed},{},{},{},{}", self.command, c.name, c.value, c.bound, c.passed))
            .collect()
    }

    /// Appends rows to `path`, writing the header first if the file is new
    /// or empty.
    pub fn append_csv(&self, path: &Path) -> Result<()> {
        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        let mut text = String::new();
        if fresh {
            text += Self::CSV_HEADER;
            text.push('\n');
        }
        for row in self.csv_rows() {
            text += &row;
            text.push('\n');
        }
        f.write_all(text.as_bytes())?;
        Ok(())
    }
}
