use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TtError};

pub const CSV_HEADER: &str = "trial,algo,iter,time_s,cost,test_cost,grad_norm,radius,step_type";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepType {
    Init,
    Accept,
    Reject,
    /// Nonlinear CG step along a conjugate direction.
    Cg,
    /// Steepest-descent step (restart or line-search fallback).
    Sd,
    Sweep,
}

impl fmt::Display for StepType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StepType::Init => "init",
            StepType::Accept => "accept",
            StepType::Reject => "reject",
            StepType::Cg => "cg",
            StepType::Sd => "sd",
            StepType::Sweep => "sweep",
        };
        f.write_str(s)
    }
}

impl FromStr for StepType {
    type Err = TtError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "init" => StepType::Init,
            "accept" => StepType::Accept,
            "reject" => StepType::Reject,
            "cg" => StepType::Cg,
            "sd" => StepType::Sd,
            "sweep" => StepType::Sweep,
            _ => return Err(TtError::Format(format!("unknown step type {s:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iter: usize,
    pub time_s: f64,
    pub cost: f64,
    pub test_cost: Option<f64>,
    pub grad_norm: Option<f64>,
    pub radius: Option<f64>,
    pub step_type: StepType,
}

/// Per-iteration history shared by all solvers.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub rows: Vec<LogRow>,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn parse_opt(s: &str, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| TtError::Format(format!("line {line}: bad number {s:?}")))
}

impl RunLog {
    pub fn push(&mut self, row: LogRow) {
        debug_assert!(self.rows.last().is_none_or(|r| r.iter < row.iter));
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }

    /// Writes the header followed by one line per row.
    pub fn write_csv(&self, w: &mut impl Write, trial: usize, algo: &str) -> Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{trial},{algo},{},{},{},{},{},{},{}",
                r.iter,
                r.time_s,
                r.cost,
                opt(r.test_cost),
                opt(r.grad_norm),
                opt(r.radius),
                r.step_type
            )?;
        }
        Ok(())
    }

    /// Parses a file written by [`write_csv`](Self::write_csv); returns
    /// `(trial, algo, log)`.
    pub fn read_csv(r: impl BufRead) -> Result<(usize, String, RunLog)> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?;
        if header.as_deref().map(str::trim_end) != Some(CSV_HEADER) {
            return Err(TtError::Format("missing run-log header".into()));
        }
        let mut log = RunLog::default();
        let mut id: Option<(usize, String)> = None;
        for (n, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(TtError::Format(format!("line {}: expected 9 fields, got {}", n + 2, f.len())));
            }
            let bad = |what: &str| TtError::Format(format!("line {}: bad {what}", n + 2));
            let trial: usize = f[0].parse().map_err(|_| bad("trial"))?;
            match &id {
                None => id = Some((trial, f[1].to_string())),
                Some((t, a)) if *t != trial || a != f[1] => return Err(bad("trial/algo (mixed series)")),
                _ => {}
            }
            let row = LogRow {
                iter: f[2].parse().map_err(|_| bad("iter"))?,
                time_s: f[3].parse().map_err(|_| bad("time_s"))?,
                cost: f[4].parse().map_err(|_| bad("cost"))?,
                test_cost: parse_opt(f[5], n + 2)?,
                grad_norm: parse_opt(f[6], n + 2)?,
                radius: parse_opt(f[7], n + 2)?,
                step_type: f[8].parse()?,
            };
            if log.rows.last().is_some_and(|r| r.iter >= row.iter) {
                return Err(bad("iter (not increasing)"));
            }
            log.rows.push(row);
        }
        let (trial, algo) = id.ok_or_else(|| TtError::Format("run log has no rows".into()))?;
        Ok((trial, algo, log))
    }
}
