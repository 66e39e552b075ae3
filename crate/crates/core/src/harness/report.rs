//! Experiment reports and their JSON / CSV serialization.

use std::fs;
use std::io::Write;
use std::path::Path as FsPath;

use serde::Serialize;

use crate::error::Result;
use crate::harness::stats::PowerFit;

/// One named comparison with its tolerance.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// `|value - target| <= tolerance`.
    pub fn close(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        let pass = (value - target).abs() <= tolerance && value.is_finite();
        Self { name: name.into(), value, target, tolerance, pass }
    }

    /// `value >= bound`.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, target: bound, tolerance: 0.0, pass: value >= bound }
    }

    /// `value <= bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, target: bound, tolerance: 0.0, pass: value <= bound }
    }

    /// Exact equality (`value == target`, reported as the gap).
    pub fn exact(name: impl Into<String>, gap: f64) -> Self {
        Self { name: name.into(), value: gap, target: 0.0, tolerance: 0.0, pass: gap == 0.0 }
    }
}

/// A plot-ready numeric table.
#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// CSV with 17 significant digits.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{}", self.columns.join(","))?;
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format_number(*v)).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// Extrapolated `eps -> 0` value.
#[derive(Clone, Debug, Serialize)]
pub struct Extrapolation {
    pub method: String,
    pub limit: f64,
    pub stderr: f64,
    pub order: f64,
    pub three_point: Option<PowerFit>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub experiment_id: String,
    pub target: Option<f64>,
    pub target_label: String,
    pub extrapolation: Option<Extrapolation>,
    pub checks: Vec<Check>,
    pub verdict: bool,
    pub wall_clock_seconds: f64,
    pub seed: u64,
    pub replicates: usize,
    pub rng: String,
    pub notes: Vec<String>,
    pub tables: Vec<Table>,
    pub config: serde_json::Value,
}

impl ExperimentReport {
    pub fn new(experiment: &str, experiment_id: &str, seed: u64, replicates: usize, config: serde_json::Value) -> Self {
        Self {
            experiment: experiment.into(),
            experiment_id: experiment_id.into(),
            target: None,
            target_label: String::new(),
            extrapolation: None,
            checks: Vec::new(),
            verdict: false,
            wall_clock_seconds: 0.0,
            seed,
            replicates,
            rng: "ChaCha8, stream = replicate index".into(),
            notes: Vec::new(),
            tables: Vec::new(),
            config,
        }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    /// Sets the verdict from the checks; an empty check list fails.
    pub fn finish(&mut self, seconds: f64) {
        self.verdict = !self.checks.is_empty() && self.checks.iter().all(|c| c.pass);
        self.wall_clock_seconds = seconds;
    }

    pub fn summary_lines(&self) -> Vec<String> {
        let mut out = vec![format!(
            "[{}] {}{} ({:.1}s)",
            if self.verdict { "PASS" } else { "FAIL" },
            self.experiment,
            if self.experiment_id.is_empty() { String::new() } else { format!(" {}", self.experiment_id) },
            self.wall_clock_seconds
        )];
        for c in &self.checks {
            out.push(format!(
                "    {} {}: value {:.6e} target {:.6e} tol {:.3e}",
                if c.pass { "ok  " } else { "FAIL" },
                c.name,
                c.value,
                c.target,
                c.tolerance
            ));
        }
        out
    }

    /// Writes `<dir>/<stem>.json` and `<dir>/tables/<stem>_<table>.csv`.
    pub fn write(&self, dir: &FsPath, stem: &str) -> Result<()> {
        fs::create_dir_all(dir.join("tables"))?;
        fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(self)?)?;
        for t in &self.tables {
            let f = fs::File::create(dir.join("tables").join(format!("{stem}_{}.csv", t.name)))?;
            t.write_csv(std::io::BufWriter::new(f))?;
        }
        Ok(())
    }
}

/// Aggregate of several reports: one JSON document and one flat CSV of checks.
pub fn summarize(reports: &[ExperimentReport], dir: &FsPath) -> Result<()> {
    fs::create_dir_all(dir.join("tables"))?;
    let all_pass = reports.iter().all(|r| r.verdict);
    let doc = serde_json::json!({ "verdict": all_pass, "reports": reports });
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&doc)?)?;
    let mut f = std::io::BufWriter::new(fs::File::create(dir.join("tables").join("checks.csv"))?);
    writeln!(f, "experiment,experiment_id,check,value,target,tolerance,pass")?;
    for r in reports {
        for c in &r.checks {
            writeln!(
                f,
                "{},{},{},{},{},{},{}",
                r.experiment,
                r.experiment_id,
                c.name,
                format_number(c.value),
                format_number(c.target),
                format_number(c.tolerance),
                c.pass as u8
            )?;
        }
    }
    for (i, r) in reports.iter().enumerate() {
        for t in &r.tables {
            let name = if r.experiment_id.is_empty() { format!("{:02}_{}_{}", i, r.experiment, t.name) } else { format!("{:02}_{}_{}_{}", i, r.experiment, r.experiment_id, t.name) };
            let name: String = name.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect();
            let f = fs::File::create(dir.join("tables").join(format!("{name}.csv")))?;
            t.write_csv(std::io::BufWriter::new(f))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        let s = format_number(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        assert_eq!(s.parse::<f64>().unwrap(), std::f64::consts::PI);
    }

    #[test]
    fn verdict_requires_checks() {
        let mut r = ExperimentReport::new("x", "", 0, 0, serde_json::Value::Null);
        r.finish(0.0);
        assert!(!r.verdict);
        r.check(Check::close("a", 1.0, 1.0, 0.0));
        r.finish(0.0);
        assert!(r.verdict);
        r.check(Check::at_least("b", -1.0, 0.0));
        r.finish(0.0);
        assert!(!r.verdict);
    }
}
