//! File outputs. Every write goes to a temporary file in the target
//! directory and is renamed into place, so readers never see partial files.

use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{SweepSummary, SwarmConfig, TrialResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Csv,
    Json,
}

pub const CSV_COLUMNS: [&str; 13] = [
    "n",
    "f",
    "trials",
    "baseline_mean",
    "baseline_median",
    "recovered_mean",
    "recovered_median",
    "recovered_iqr",
    "tp",
    "fp",
    "fn",
    "leader_ops_mean",
    "node_ops_mean",
];

pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_atomic(path, |w| {
        w.write_all(text.as_bytes())?;
        w.write_all(b"\n")
    })
}

pub fn summary_csv(summary: &SweepSummary) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for c in &summary.cells {
        w.serialize((
            c.n,
            c.f,
            c.trials,
            c.baseline.mean,
            c.baseline.median,
            c.recovered.mean,
            c.recovered.median,
            c.recovered.iqr,
            c.tp,
            c.fp,
            c.fn_,
            c.leader_ops_mean,
            c.node_ops_mean,
        ))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
}

/// Write the per-cell summary as CSV (fixed columns) or JSON (everything, config included).
pub fn export_results(summary: &SweepSummary, format: ExportFormat, path: &Path) -> Result<()> {
    match format {
        ExportFormat::Csv => {
            let text = summary_csv(summary)?;
            write_atomic(path, |w| w.write_all(text.as_bytes()))
        }
        ExportFormat::Json => write_json(summary, path),
    }
}

#[derive(Serialize)]
struct JsonlHeader<'a> {
    config: &'a SwarmConfig,
}

/// One JSON object per line: a `{"config": ..}` header, then one row per trial.
pub fn write_trials_jsonl(config: &SwarmConfig, trials: &[TrialResult], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    serde_json::to_writer(&mut buf, &JsonlHeader { config })?;
    buf.push(b'\n');
    for t in trials {
        serde_json::to_writer(&mut buf, t)?;
        buf.push(b'\n');
    }
    write_atomic(path, |w| w.write_all(&buf))
}
