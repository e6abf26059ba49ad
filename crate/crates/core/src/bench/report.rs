use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::campaign::{CampaignResult, SeedRow};

/// Raw campaign output written by `ftsim run` and `ftsim sweep`.
pub const RESULTS_FILE: &str = "results.json";

/// Per-seed CSV columns, in order. The seven time buckets sum to `total_s`.
pub const CSV_COLUMNS: [&str; 25] = [
    "app",
    "mode",
    "cores",
    "n",
    "m",
    "seed",
    "mtbf_s",
    "ckpt_cost_s",
    "tau_s",
    "completed",
    "failures",
    "repairs",
    "restarts",
    "waves",
    "total_s",
    "useful_work_s",
    "redundant_work_s",
    "checkpoint_create_s",
    "restore_s",
    "rollback_s",
    "log_removal_s",
    "idle_s",
    "flops_total",
    "flops_per_core",
    "efficiency",
];

pub const AGGREGATE_COLUMNS: [&str; 13] = [
    "app",
    "mode",
    "cores",
    "runs",
    "failed",
    "efficiency_mean",
    "efficiency_std",
    "total_s_mean",
    "useful_work_s_mean",
    "redundant_work_s_mean",
    "checkpoint_create_s_mean",
    "restore_s_mean",
    "rollback_s_mean",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!(
                "unknown report format {other:?} (expected csv or json)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn row_record(r: &SeedRow) -> Vec<String> {
    let m = &r.metrics;
    vec![
        r.app.clone(),
        r.mode.short_name().to_string(),
        r.cores.to_string(),
        r.n.to_string(),
        r.m.to_string(),
        r.seed.to_string(),
        opt(r.mtbf_s),
        r.ckpt_cost_s.to_string(),
        opt(r.tau_s),
        r.completed.to_string(),
        r.failures.to_string(),
        r.repairs.to_string(),
        r.restarts.to_string(),
        r.waves.to_string(),
        m.total_s.to_string(),
        m.useful_work_s.to_string(),
        m.redundant_work_s.to_string(),
        m.checkpoint_create_s.to_string(),
        m.restore_s.to_string(),
        m.rollback_s.to_string(),
        m.log_removal_s.to_string(),
        m.idle_s.to_string(),
        m.flops_total.to_string(),
        m.flops_per_core.to_string(),
        opt(m.efficiency),
    ]
}

pub fn write_results(dir: &Path, results: &[CampaignResult]) -> Result<PathBuf, ReportError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(RESULTS_FILE);
    let text = serde_json::to_string_pretty(results).map_err(|source| ReportError::Json {
        path: path.clone(),
        source,
    })?;
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

pub fn read_results(dir: &Path) -> Result<Vec<CampaignResult>, ReportError> {
    let path = dir.join(RESULTS_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|source| ReportError::Json { path, source })
}

/// Writes `rows.csv` and `aggregate.csv`, or `report.json`, into `dir`.
/// Returns the files written.
pub fn emit_report(
    results: &[CampaignResult],
    format: ReportFormat,
    dir: &Path,
) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    match format {
        ReportFormat::Json => {
            let path = dir.join("report.json");
            let text =
                serde_json::to_string_pretty(results).map_err(|source| ReportError::Json {
                    path: path.clone(),
                    source,
                })?;
            fs::write(&path, text).map_err(io_err(&path))?;
            Ok(vec![path])
        }
        ReportFormat::Csv => {
            let rows_path = dir.join("rows.csv");
            let mut w = csv::Writer::from_path(&rows_path)?;
            w.write_record(CSV_COLUMNS)?;
            for r in results.iter().flat_map(|c| &c.rows) {
                w.write_record(row_record(r))?;
            }
            w.flush().map_err(io_err(&rows_path))?;

            let agg_path = dir.join("aggregate.csv");
            let mut w = csv::Writer::from_path(&agg_path)?;
            w.write_record(AGGREGATE_COLUMNS)?;
            for c in results {
                let a = &c.aggregate;
                w.write_record([
                    c.config.app.clone(),
                    c.config.mode.short_name().to_string(),
                    c.config.cores.to_string(),
                    a.runs.to_string(),
                    a.failed.to_string(),
                    a.efficiency.mean.to_string(),
                    a.efficiency.std.to_string(),
                    a.total_s.mean.to_string(),
                    a.useful_work_s.mean.to_string(),
                    a.redundant_work_s.mean.to_string(),
                    a.checkpoint_create_s.mean.to_string(),
                    a.restore_s.mean.to_string(),
                    a.rollback_s.mean.to_string(),
                ])?;
            }
            w.flush().map_err(io_err(&agg_path))?;
            Ok(vec![rows_path, agg_path])
        }
    }
}
