//! Outcomes of hypothesis checks and their line-oriented text form.
//!
//! Each report renders as one summary line followed by one line per evidence
//! row, all in the shape
//!
//! ```text
//! check=<name> j=<j> value=<v> bound=<b> verdict=<pass|fail|info>
//! ```
//!
//! `j` and `bound` are `-` when absent. Evidence rows use `<name>/<label>` as
//! the check name. Numbers are written with 17 significant digits.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Pass,
    Fail,
    Info,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Info => "info",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pass" => Ok(Verdict::Pass),
            "fail" => Ok(Verdict::Fail),
            "info" => Ok(Verdict::Info),
            other => Err(Error::Format(format!("unknown verdict {other:?}"))),
        }
    }
}

/// One measured quantity backing a report.
#[derive(Clone, Debug, PartialEq)]
pub struct Evidence {
    pub label: String,
    pub j: Option<u32>,
    pub value: f64,
    pub bound: Option<f64>,
    pub verdict: Verdict,
}

impl Evidence {
    pub fn new(label: impl Into<String>, value: f64) -> Self {
        Self {
            label: label.into(),
            j: None,
            value,
            bound: None,
            verdict: Verdict::Info,
        }
    }

    pub fn at(mut self, j: u32) -> Self {
        self.j = Some(j);
        self
    }

    pub fn bounded_by(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self
    }

    pub fn verdict(mut self, verdict: Verdict) -> Self {
        self.verdict = verdict;
        self
    }
}

/// Result of checking one hypothesis: verdict, the measured constant, the
/// bound or tolerance it was held to, and the evidence points.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub check: String,
    pub verdict: Verdict,
    pub value: f64,
    pub bound: Option<f64>,
    pub tolerance: Option<f64>,
    /// Where a failure was detected (a radius, an index, a point).
    pub witness: Option<f64>,
    /// False when some member of a family could not be generated.
    pub complete: bool,
    pub evidence: Vec<Evidence>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn new(check: impl Into<String>, verdict: Verdict, value: f64) -> Self {
        Self {
            check: check.into(),
            verdict,
            value,
            bound: None,
            tolerance: None,
            witness: None,
            complete: true,
            evidence: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = Some(tol);
        self
    }

    pub fn with_witness(mut self, witness: f64) -> Self {
        self.witness = Some(witness);
        self
    }

    pub fn push(&mut self, evidence: Evidence) {
        self.evidence.push(evidence);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        push_line(&mut out, &self.check, None, self.value, self.bound, self.verdict);
        for e in &self.evidence {
            let name = format!("{}/{}", self.check, e.label);
            push_line(&mut out, &name, e.j, e.value, e.bound, e.verdict);
        }
        out
    }
}

fn push_line(out: &mut String, name: &str, j: Option<u32>, value: f64, bound: Option<f64>, v: Verdict) {
    use std::fmt::Write;
    let j = j.map_or_else(|| "-".to_string(), |j| j.to_string());
    let bound = bound.map_or_else(|| "-".to_string(), fmt_num);
    let _ = writeln!(out, "check={name} j={j} value={} bound={bound} verdict={v}", fmt_num(value));
}

/// 17 significant digits, round-trip exact.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// A parsed `check=... j=... value=... bound=... verdict=...` line.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportLine {
    pub check: String,
    pub j: Option<u32>,
    pub value: f64,
    pub bound: Option<f64>,
    pub verdict: Verdict,
}

impl FromStr for ReportLine {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let mut check = None;
        let mut j = None;
        let mut value = None;
        let mut bound = None;
        let mut verdict = None;
        for field in line.split_whitespace() {
            let (key, val) = field
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("field without '=': {field:?}")))?;
            let num = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number {v:?}")))
            };
            match key {
                "check" => check = Some(val.to_string()),
                "j" if val != "-" => {
                    j = Some(
                        val.parse()
                            .map_err(|_| Error::Format(format!("bad index {val:?}")))?,
                    )
                }
                "j" => {}
                "value" => value = Some(num(val)?),
                "bound" if val != "-" => bound = Some(num(val)?),
                "bound" => {}
                "verdict" => verdict = Some(val.parse()?),
                other => return Err(Error::Format(format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::Format(format!("missing {k} in {line:?}"));
        Ok(ReportLine {
            check: check.ok_or_else(|| missing("check"))?,
            j,
            value: value.ok_or_else(|| missing("value"))?,
            bound,
            verdict: verdict.ok_or_else(|| missing("verdict"))?,
        })
    }
}

pub fn parse_lines(text: &str) -> Result<Vec<ReportLine>> {
    text.lines()
        .filter(|l| l.starts_with("check="))
        .map(str::parse)
        .collect()
}
