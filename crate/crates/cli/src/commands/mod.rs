pub mod cache;
pub mod rays;
pub mod report;
pub mod solve;
pub mod verify;

use std::path::{Path, PathBuf};

use uhs_core::{ApplyMode, RunRecord};

use crate::config::{LoadedConfig, RunPoint};
use crate::error::{CliError, CliResult};
use crate::plot::{Plot, Series};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Number of violated estimates.
    Violations(usize),
}

pub(crate) fn run_dir(out: &Path, run_hash: &str) -> PathBuf {
    out.join("runs").join(run_hash)
}

pub(crate) fn record_path(out: &Path, run_hash: &str) -> PathBuf {
    run_dir(out, run_hash).join("record.json")
}

pub(crate) fn apply_mode(lc: &LoadedConfig) -> ApplyMode {
    match lc.config.cache.chunk_size {
        Some(chunk_size) => ApplyMode::Chunked { chunk_size },
        None => ApplyMode::Dense,
    }
}

pub(crate) fn pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Config { path: PathBuf::from("--jobs"), message: "must be at least 1".into() });
        }
        b = b.num_threads(j);
    }
    b.build().map_err(|e| CliError::Internal(format!("worker pool: {e}")))
}

pub(crate) struct StoredRun {
    pub point: RunPoint,
    pub hash: String,
    pub record: RunRecord,
}

/// Loads the record of every sweep point, failing with the list of absent run hashes.
pub(crate) fn load_runs(lc: &LoadedConfig) -> CliResult<Vec<StoredRun>> {
    let out = lc.output_dir();
    let cfg = &lc.config;
    let mut missing = Vec::new();
    let mut runs = Vec::new();
    for point in cfg.run_points() {
        let hash = cfg.run_hash(&point);
        let path = record_path(&out, &hash);
        if !path.exists() {
            missing.push(hash);
            continue;
        }
        let record = RunRecord::load_json(&path)?;
        runs.push(StoredRun { point, hash, record });
    }
    if !missing.is_empty() {
        return Err(CliError::MissingRuns(missing));
    }
    Ok(runs)
}

pub(crate) fn run_label(p: &RunPoint) -> String {
    let mut s = format!("eps={:e} M={} amp={}", p.epsilon, p.points, p.amplitude);
    if let Some(r) = p.radius {
        s.push_str(&format!(" R={r}"));
    }
    s
}

pub(crate) fn norm_plot(runs: &[StoredRun]) -> Plot {
    Plot {
        x_label: "t".into(),
        y_label: "l2".into(),
        log_x: false,
        log_y: false,
        series: runs
            .iter()
            .map(|r| Series { label: run_label(&r.point), points: r.record.rows.iter().map(|row| (row.t, row.l2)).collect() })
            .collect(),
    }
}
