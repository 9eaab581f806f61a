use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{log_file_name, Algorithm, Summary};
use crate::error::{Result, TtError};
use crate::optim::{LogRow, RunLog};

/// Long format: one row per (series, logged iteration).
pub const PLOT_HEADER: &str = "trial,algo,iter,time_s,value";

/// Paths of the emitted files and the number of series in each.
#[derive(Clone, Debug)]
pub struct PlotData {
    pub files: Vec<(String, PathBuf, usize)>,
}

type Metric = (&'static str, fn(&LogRow) -> Option<f64>);

const METRICS: [Metric; 3] = [
    ("cost", |r| Some(r.cost)),
    ("test_cost", |r| r.test_cost),
    ("grad_norm", |r| r.grad_norm),
];

/// Writes `plot_cost.csv`, `plot_test_cost.csv` and `plot_grad_norm.csv`
/// into the run directory. Each (trial, algorithm) pair is one series; both
/// the iteration and the time axis are columns. ALS has no gradient series.
pub fn emit_plot_data(run_dir: &Path) -> Result<PlotData> {
    let summary = Summary::load(run_dir)
        .map_err(|e| TtError::Format(format!("{}: no readable summary ({e})", run_dir.display())))?;
    let mut logs: Vec<(usize, Algorithm, RunLog)> = Vec::new();
    for t in &summary.trials {
        for run in &t.runs {
            let path = run_dir.join(log_file_name(t.trial, run.algo));
            let file = fs::File::open(&path)
                .map_err(|e| TtError::Format(format!("missing log {}: {e}", path.display())))?;
            let (trial, algo, log) = RunLog::read_csv(BufReader::new(file))?;
            if trial != t.trial || algo != run.algo.name() {
                return Err(TtError::Format(format!("{} holds trial {trial} / {algo}", path.display())));
            }
            if log.len() != run.rows {
                return Err(TtError::Format(format!(
                    "partial log {}: {} rows, summary records {}",
                    path.display(),
                    log.len(),
                    run.rows
                )));
            }
            logs.push((trial, run.algo, log));
        }
    }

    let mut files = Vec::new();
    for (name, get) in METRICS {
        let path = run_dir.join(format!("plot_{name}.csv"));
        let mut w = BufWriter::new(fs::File::create(&path)?);
        writeln!(w, "{PLOT_HEADER}")?;
        let mut series = 0;
        for (trial, algo, log) in &logs {
            if name == "grad_norm" && !algo.uses_gradient() {
                continue;
            }
            let mut any = false;
            for row in &log.rows {
                if let Some(v) = get(row) {
                    writeln!(w, "{trial},{},{},{},{v:e}", algo.name(), row.iter, row.time_s)?;
                    any = true;
                }
            }
            series += usize::from(any);
        }
        w.flush()?;
        files.push((name.to_string(), path, series));
    }
    Ok(PlotData { files })
}
