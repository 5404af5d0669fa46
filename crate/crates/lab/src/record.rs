use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::LabError;

pub const RECORD_FILE: &str = "record.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    /// `None` when a prerequisite failed and nothing could be measured.
    pub measured: Option<f64>,
    /// Human-readable acceptance condition, e.g. `<= 1e-2`.
    pub threshold: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn fmt(v: f64) -> String {
    let s = format!("{v:e}");
    if s.len() > 10 {
        format!("{v:.4e}")
    } else {
        s
    }
}

impl Assertion {
    pub fn at_most(name: &str, measured: f64, bound: f64) -> Self {
        Self::check(name, measured, format!("<= {}", fmt(bound)), measured <= bound)
    }

    pub fn below(name: &str, measured: f64, bound: f64) -> Self {
        Self::check(name, measured, format!("< {}", fmt(bound)), measured < bound)
    }

    pub fn at_least(name: &str, measured: f64, bound: f64) -> Self {
        Self::check(name, measured, format!(">= {}", fmt(bound)), measured >= bound)
    }

    pub fn within(name: &str, measured: f64, lo: f64, hi: f64) -> Self {
        Self::check(name, measured, format!("in [{}, {}]", fmt(lo), fmt(hi)), lo <= measured && measured <= hi)
    }

    pub fn holds(name: &str, measured: f64, threshold: &str, passed: bool) -> Self {
        Self::check(name, measured, threshold.to_string(), passed)
    }

    fn check(name: &str, measured: f64, threshold: String, passed: bool) -> Self {
        // NaN compares false everywhere, so it always fails
        let measured = measured.is_finite().then_some(measured);
        Assertion { name: name.to_string(), measured, threshold, passed: passed && measured.is_some(), error: None }
    }

    pub fn failed(name: &str, threshold: &str, error: impl ToString) -> Self {
        Assertion {
            name: name.to_string(),
            measured: None,
            threshold: threshold.to_string(),
            passed: false,
            error: Some(error.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub experiment: String,
    /// What the experiment checks, in one line.
    pub claim: String,
    pub seed: u64,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<String>,
    pub assertions: Vec<Assertion>,
    pub notes: Vec<String>,
}

pub fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl RunRecord {
    pub fn new(config_hash: &str, experiment: &str, claim: &str, seed: u64) -> Self {
        RunRecord {
            config_hash: config_hash.to_string(),
            experiment: experiment.to_string(),
            claim: claim.to_string(),
            seed,
            started_unix: now_unix(),
            finished_unix: 0.0,
            outputs: Vec::new(),
            assertions: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn push(&mut self, a: Assertion) {
        self.assertions.push(a);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn write(&mut self, dir: &Path) -> Result<PathBuf, LabError> {
        self.finished_unix = now_unix();
        std::fs::create_dir_all(dir)?;
        let path = dir.join(RECORD_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| LabError::Data(e.to_string()))?;
        std::fs::write(&path, text)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| LabError::Data(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportStatus {
    AllPassed,
    AssertionFailed,
    /// No records, or at least one unreadable.
    DataError,
}

impl ReportStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            ReportStatus::AllPassed => 0,
            ReportStatus::AssertionFailed => 1,
            ReportStatus::DataError => 2,
        }
    }
}

/// `record.json` directly in `dir` or one level below, sorted by path.
fn record_paths(dir: &Path) -> Result<Vec<PathBuf>, LabError> {
    let mut out = Vec::new();
    let direct = dir.join(RECORD_FILE);
    if direct.is_file() {
        out.push(direct);
    }
    let entries = std::fs::read_dir(dir).map_err(|e| LabError::Io(format!("{}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry?.path();
        let candidate = path.join(RECORD_FILE);
        if path.is_dir() && candidate.is_file() {
            out.push(candidate);
        }
    }
    out.sort();
    Ok(out)
}

/// One section per run, one line per assertion.
pub fn report(dir: &Path) -> Result<(String, ReportStatus), LabError> {
    let paths = record_paths(dir)?;
    if paths.is_empty() {
        return Ok(("no runs found\n".to_string(), ReportStatus::DataError));
    }
    let mut text = String::new();
    let (mut failed, mut unreadable) = (false, false);
    for path in &paths {
        match RunRecord::read(path) {
            Ok(rec) => {
                let verdict = if rec.passed() { "PASS" } else { "FAIL" };
                writeln!(text, "== {} [{}] {} ({})", rec.experiment, &rec.config_hash[..rec.config_hash.len().min(12)], verdict, path.display()).unwrap();
                for a in &rec.assertions {
                    let m = a.measured.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "n/a".into());
                    let mark = if a.passed { "pass" } else { "FAIL" };
                    write!(text, "  {:<36} {:>14}  {:<28} {}", a.name, m, a.threshold, mark).unwrap();
                    if let Some(e) = &a.error {
                        write!(text, "  ({e})").unwrap();
                    }
                    text.push('\n');
                }
                failed |= !rec.passed();
            }
            Err(e) => {
                writeln!(text, "== unreadable: {e}").unwrap();
                unreadable = true;
            }
        }
    }
    let status = if unreadable {
        ReportStatus::DataError
    } else if failed {
        ReportStatus::AssertionFailed
    } else {
        ReportStatus::AllPassed
    };
    Ok((text, status))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_never_passes() {
        assert!(!Assertion::at_most("x", f64::NAN, 1.0).passed);
        assert!(Assertion::at_most("x", 1.0, 1.0).passed);
        assert!(!Assertion::below("x", 1.0, 1.0).passed);
        assert!(Assertion::within("x", 0.6, 0.56, 0.7).passed);
    }

    #[test]
    fn record_round_trips() {
        let dir = std::env::temp_dir().join(format!("pblab-record-{}", std::process::id()));
        let mut rec = RunRecord::new("abc", "lyapunov_zero", "claim", 3);
        rec.push(Assertion::at_most("a", 0.5, 1.0));
        rec.push(Assertion::failed("b", "<= 1", "pullback did not converge"));
        let path = rec.write(&dir).unwrap();
        assert_eq!(RunRecord::read(&path).unwrap(), rec);
        let (_, status) = report(&dir).unwrap();
        assert_eq!(status, ReportStatus::AssertionFailed);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
