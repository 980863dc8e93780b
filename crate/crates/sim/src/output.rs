//! Trace CSV and aggregate JSON artifacts.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use hetbandit_core::RunTrace;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::report::AggregateReport;

pub const CSV_HEADER: [&str; 10] = [
    "seed",
    "t",
    "action_index",
    "level",
    "sigma_t",
    "reward",
    "regret_inst",
    "regret_cum",
    "J_cum",
    "coverage_ok",
];

pub const TRACES_FILE: &str = "traces.csv";
pub const REPORT_FILE: &str = "report.json";

/// One CSV row: a single round of a single seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub seed: u64,
    pub t: usize,
    pub action_index: usize,
    pub level: usize,
    pub sigma_t: f64,
    pub reward: f64,
    pub regret_inst: f64,
    pub regret_cum: f64,
    pub j_cum: f64,
    pub coverage_ok: Option<bool>,
}

impl TraceRow {
    pub fn from_trace(trace: &RunTrace) -> impl Iterator<Item = TraceRow> + '_ {
        let seed = trace.seed.unwrap_or(0);
        trace.rounds.iter().map(move |r| TraceRow {
            seed,
            t: r.t,
            action_index: r.action_index,
            level: r.level,
            sigma_t: r.sigma,
            reward: r.reward,
            regret_inst: r.regret_inst,
            regret_cum: r.regret_cum,
            j_cum: r.j_cum,
            coverage_ok: r.coverage_ok,
        })
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_error(path: &Path) -> impl FnOnce(csv::Error) -> SimError + '_ {
    move |source| SimError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_csv<W: Write>(rows: impl IntoIterator<Item = TraceRow>, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.t.to_string(),
            r.action_index.to_string(),
            r.level.to_string(),
            float(r.sigma_t),
            float(r.reward),
            float(r.regret_inst),
            float(r.regret_cum),
            float(r.j_cum),
            r.coverage_ok.map_or(String::new(), |c| c.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes every trace's rounds to `path`, seeds in the given order.
pub fn emit_csv(traces: &[RunTrace], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| SimError::io(path, e))?;
    write_csv(traces.iter().flat_map(TraceRow::from_trace), file).map_err(csv_error(path))
}

pub fn read_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_error(path))?;
    let header = reader.headers().map_err(csv_error(path))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(SimError::Trace {
            path: path.to_path_buf(),
            row: 0,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error(path))?;
        let bad = |message: String| SimError::Trace {
            path: path.to_path_buf(),
            row: i + 1,
            message,
        };
        let field = |k: usize| record.get(k).unwrap_or("");
        macro_rules! parse {
            ($k:expr) => {
                field($k)
                    .parse()
                    .map_err(|e| bad(format!("column {}: {e}", CSV_HEADER[$k])))?
            };
        }
        let coverage_ok = match field(9) {
            "" => None,
            "true" => Some(true),
            "false" => Some(false),
            other => return Err(bad(format!("coverage_ok: unexpected {other:?}"))),
        };
        rows.push(TraceRow {
            seed: parse!(0),
            t: parse!(1),
            action_index: parse!(2),
            level: parse!(3),
            sigma_t: parse!(4),
            reward: parse!(5),
            regret_inst: parse!(6),
            regret_cum: parse!(7),
            j_cum: parse!(8),
            coverage_ok,
        });
    }
    Ok(rows)
}

/// All `*.csv` files under `dir`, sorted by name.
pub fn trace_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| SimError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn write_report(report: &AggregateReport, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| SimError::io(path, e))?;
    serde_json::to_writer_pretty(file, report).map_err(|source| SimError::Json {
        path: path.to_path_buf(),
        source,
    })
}
