//! Scenario engine: canonical experiments configured from JSON, run
//! deterministically and reported with one verdict per check.

mod config;
mod kinds;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::Value;

pub use config::*;
pub use kinds::grid_meter;

use crate::error::{Error, Result};
use crate::multiparticle::Statistics;
use crate::report::{canonical_json, to_canonical_json};
use crate::separation::SeparationReport;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// What was measured and the bound it was held to, when the check is numeric.
    pub measured: Option<f64>,
    pub threshold: Option<f64>,
    /// `below`, `above` or `holds`.
    pub relation: &'static str,
    pub detail: Option<String>,
}

/// Extra output written next to `report.json`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub scenario: String,
    pub kind: String,
    pub config: Value,
    pub checks: Vec<Check>,
    pub tables: BTreeMap<String, Value>,
    pub passed: bool,
    pub verdict: String,
    pub versions: BTreeMap<String, String>,
    #[serde(skip)]
    pub files: Vec<OutputFile>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl Report {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        to_canonical_json(self)
    }

    /// 0 when every check passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

/// Process exit code for a scenario outcome: 2 for configuration or runtime errors.
pub fn exit_code(outcome: &Result<Report>) -> i32 {
    match outcome {
        Ok(r) => r.exit_code(),
        Err(_) => 2,
    }
}

pub(crate) struct ReportBuilder {
    checks: Vec<Check>,
    tables: BTreeMap<String, Value>,
    files: Vec<OutputFile>,
}

impl ReportBuilder {
    fn new() -> Self {
        Self {
            checks: Vec::new(),
            tables: BTreeMap::new(),
            files: Vec::new(),
        }
    }

    fn push(&mut self, check: Check) {
        assert!(
            self.checks.iter().all(|c| c.name != check.name),
            "check {} recorded twice",
            check.name
        );
        self.checks.push(check);
    }

    pub(crate) fn below(&mut self, name: impl Into<String>, measured: f64, threshold: f64) {
        self.push(Check {
            name: name.into(),
            passed: measured < threshold,
            measured: Some(measured),
            threshold: Some(threshold),
            relation: "below",
            detail: None,
        });
    }

    pub(crate) fn above(&mut self, name: impl Into<String>, measured: f64, threshold: f64) {
        self.push(Check {
            name: name.into(),
            passed: measured > threshold,
            measured: Some(measured),
            threshold: Some(threshold),
            relation: "above",
            detail: None,
        });
    }

    pub(crate) fn holds(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.push(Check {
            name: name.into(),
            passed,
            measured: None,
            threshold: None,
            relation: "holds",
            detail: Some(detail.into()),
        });
    }

    pub(crate) fn table(&mut self, name: impl Into<String>, value: impl Serialize) -> Result<()> {
        self.tables.insert(name.into(), serde_json::to_value(value)?);
        Ok(())
    }

    pub(crate) fn file(&mut self, name: impl Into<String>, contents: impl Into<String>) {
        self.files.push(OutputFile {
            name: name.into(),
            contents: contents.into(),
        });
    }
}

/// Preparation gate: a prepared state without separation status stops the
/// scenario unless the config allows or expects the violation.
pub(crate) fn gate(cfg: &ScenarioConfig, report: &SeparationReport) -> Result<()> {
    if report.separated || cfg.allow_violation || cfg.expect_violation {
        Ok(())
    } else {
        Err(Error::PreparationViolation(Box::new(report.clone())))
    }
}

/// `(dim, env_particles, statistics)` combinations of a sweep that admit a
/// separated instance, in a fixed order.
pub fn sweep_cases(s: &SweepSpec) -> Vec<(usize, usize, Statistics)> {
    let mut out = Vec::new();
    for stats in s.statistics.expand() {
        for &d in &s.dims {
            for &n in &s.env_particles {
                let min_env = if stats == Statistics::Boson { 1 } else { n };
                if n >= 1 && d > min_env {
                    out.push((d, n, stats));
                }
            }
        }
    }
    out
}

pub fn stats_label(s: Statistics) -> &'static str {
    match s {
        Statistics::Boson => "boson",
        Statistics::Fermion => "fermion",
    }
}

/// Applies command-line overrides, then revalidates.
pub fn apply_overrides(
    mut cfg: ScenarioConfig,
    seed: Option<u64>,
    shots: Option<u64>,
    tol: Option<f64>,
) -> Result<ScenarioConfig> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(s) = shots {
        cfg.shots = s;
    }
    if tol.is_some() {
        cfg.tolerance = tol;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Report> {
    cfg.validate()?;
    let start = Instant::now();
    let mut b = ReportBuilder::new();
    match &cfg.spec {
        ScenarioSpec::TwoLab(c) => kinds::two_lab(cfg, c, &mut b)?,
        ScenarioSpec::DetectorGrid(c) => kinds::detector_grid(cfg, c, &mut b)?,
        ScenarioSpec::Equivalence(c) => kinds::equivalence(cfg, c, &mut b)?,
        ScenarioSpec::Dynamics(c) => kinds::dynamics(cfg, c, &mut b)?,
        ScenarioSpec::SeparationCheck(c) => kinds::separation_check(cfg, c, &mut b)?,
    }
    let passed = !b.checks.is_empty() && b.checks.iter().all(|c| c.passed);
    let verdict = match (cfg.expect_violation, passed) {
        (true, true) => "violation demonstrated",
        (true, false) => "violation not demonstrated",
        (false, true) => "pass",
        (false, false) => "fail",
    };
    let mut versions = BTreeMap::new();
    versions.insert("imlab".to_string(), env!("CARGO_PKG_VERSION").to_string());
    Ok(Report {
        scenario: cfg.display_name(),
        kind: cfg.kind().to_string(),
        config: serde_json::to_value(cfg)?,
        checks: b.checks,
        tables: b.tables,
        passed,
        verdict: verdict.to_string(),
        versions,
        files: b.files,
        elapsed: start.elapsed(),
    })
}

/// Writes `report.json`, the scenario's CSV/JSON tables and a `run_meta.json`
/// with wall-clock timing. Everything except `run_meta.json` is bit-stable.
pub fn emit_report(report: &Report, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut write = |name: &str, contents: &str| -> Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, contents)?;
        written.push(path);
        Ok(())
    };
    write("report.json", &report.to_json()?)?;
    for f in &report.files {
        write(&f.name, &f.contents)?;
    }
    let meta = serde_json::json!({
        "elapsed_seconds": report.elapsed.as_secs_f64(),
        "threads": rayon::current_num_threads(),
    });
    write("run_meta.json", &canonical_json(&meta))?;
    Ok(written)
}

/// Caps the global thread pool at `IMLAB_THREADS` when set. Returns the cap.
pub fn configure_threads_from_env() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var("IMLAB_THREADS") else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("IMLAB_THREADS must be a positive integer, got {raw:?}")))?;
    // a pool that is already initialized keeps its size; that only happens in tests
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(Some(n))
}

#[cfg(test)]
mod tests;
