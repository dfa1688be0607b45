//! Experiment reports and their on-disk layout.
//!
//! A report directory holds `report.txt` (key=value lines followed by the
//! condition-report lines), one CSV per table, one CSV of evidence rows per
//! condition report, the canonical `config.toml`, and `timing.txt`. Only
//! `timing.txt` varies between runs of the same configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Duration;

use sha2::{Digest, Sha256};

use randmoll_core::report::fmt_num;
use randmoll_core::{ConditionReport, Verdict};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{CliError, Result};
use crate::plot::{line_plot, Axis, Series};

/// Numeric table written as CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_num(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Line plot drawn from a table: `y` against `x`, one series per distinct
/// value of `group`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotSpec {
    pub file: String,
    pub title: String,
    pub table: String,
    pub x: String,
    pub y: String,
    pub group: Option<String>,
    pub log_x: bool,
    pub log_y: bool,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub name: String,
    pub experiment: ExperimentKind,
    /// The result the experiment exercises, in words.
    pub exercises: String,
    pub verdict: String,
    pub status: Verdict,
    /// Extra `key=value` lines, in order.
    pub summary: Vec<(String, String)>,
    /// Condition reports the verdict depended on.
    pub conditions: Vec<ConditionReport>,
    pub tables: Vec<Table>,
    pub plots: Vec<PlotSpec>,
    pub seed: u64,
    pub config_hash: String,
    pub config_text: String,
    pub runtime: Duration,
}

impl ExperimentReport {
    pub fn new(cfg: &ExperimentConfig, exercises: &str) -> Self {
        let text = cfg.to_toml();
        Self {
            name: cfg.name.clone(),
            experiment: cfg.experiment,
            exercises: exercises.into(),
            verdict: String::new(),
            status: Verdict::Info,
            summary: Vec::new(),
            conditions: Vec::new(),
            tables: Vec::new(),
            plots: Vec::new(),
            seed: cfg.seed,
            config_hash: config_hash(&text),
            config_text: text,
            runtime: Duration::ZERO,
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.into(), value.to_string()));
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn summary_value(&self, key: &str) -> Option<&str> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn failed(&self) -> bool {
        self.status == Verdict::Fail
    }

    /// Everything except the runtime.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "name={}", self.name);
        let _ = writeln!(out, "experiment={}", self.experiment.name());
        let _ = writeln!(out, "exercises={}", self.exercises);
        let _ = writeln!(out, "verdict={}", self.verdict);
        let _ = writeln!(out, "status={}", self.status);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "config_sha256={}", self.config_hash);
        for (k, v) in &self.summary {
            let _ = writeln!(out, "{k}={v}");
        }
        let deps: Vec<&str> = self.conditions.iter().map(|c| c.check.as_str()).collect();
        let _ = writeln!(out, "depends_on={}", if deps.is_empty() { "-".into() } else { deps.join(",") });
        for c in &self.conditions {
            out.push_str(&c.to_lines());
            for n in &c.notes {
                let _ = writeln!(out, "note[{}]={n}", c.check);
            }
        }
        out
    }

    /// Writes the report directory; SVG plots only when `plots` is set.
    pub fn write(&self, dir: &Path, plots: bool) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let put = |file: &str, body: &str| {
            let p = dir.join(file);
            fs::write(&p, body).map_err(|e| CliError::io(&p, e))
        };
        put("report.txt", &self.to_text())?;
        put("config.toml", &self.config_text)?;
        put("timing.txt", &format!("runtime_ms={}\n", self.runtime.as_millis()))?;
        for t in &self.tables {
            put(&format!("{}.csv", t.name), &t.to_csv())?;
        }
        for c in &self.conditions {
            put(&format!("evidence-{}.csv", c.check), &evidence_csv(c))?;
        }
        if plots {
            for p in &self.plots {
                if let Some(svg) = self.render(p) {
                    put(&p.file, &svg)?;
                }
            }
        }
        Ok(())
    }

    fn render(&self, p: &PlotSpec) -> Option<String> {
        let t = self.table(&p.table)?;
        let xs = t.column(&p.x)?;
        let ys = t.column(&p.y)?;
        let groups = match &p.group {
            Some(g) => t.column(g)?,
            None => vec![0.0; xs.len()],
        };
        let mut series: Vec<Series> = Vec::new();
        for ((x, y), g) in xs.into_iter().zip(ys).zip(groups) {
            let label = match &p.group {
                Some(name) => format!("{name}={g}"),
                None => p.y.clone(),
            };
            match series.iter_mut().find(|s| s.label == label) {
                Some(s) => s.points.push((x, y)),
                None => series.push(Series { label, points: vec![(x, y)] }),
            }
        }
        let axis = |label: &str, log: bool| Axis { label: label.into(), log };
        Some(line_plot(&p.title, &axis(&p.x, p.log_x), &axis(&p.y, p.log_y), &series))
    }
}

fn evidence_csv(c: &ConditionReport) -> String {
    let mut out = String::from("label,j,value,bound,verdict\n");
    for e in &c.evidence {
        let j = e.j.map_or_else(String::new, |j| j.to_string());
        let b = e.bound.map_or_else(String::new, fmt_num);
        let _ = writeln!(out, "{},{j},{},{b},{}", e.label, fmt_num(e.value), e.verdict);
    }
    out
}

/// Lowercase hex SHA-256 of the canonical config text.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_seventeen_digits() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![0.1, 1.0 / 3.0]);
        let csv = t.to_csv();
        let row = csv.lines().nth(1).unwrap();
        let back: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(back, vec![0.1, 1.0 / 3.0]);
        assert_eq!(row.split(',').next().unwrap(), "1.0000000000000001e-1");
    }

    #[test]
    fn hash_is_stable_hex() {
        let h = config_hash("abc");
        assert_eq!(h, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
