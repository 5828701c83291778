use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::snapshot::Snapshot;
use super::SolverConfig;
use crate::coefficients::ModelSpec;
use crate::error::Result;

/// Measurements at one recorded time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub t: f64,
    pub l2: f64,
    /// One entry per configured tracked norm, same order.
    pub tracked: Vec<f64>,
    /// ‖⟨x⟩^{−Ñ/2}J^s u(t)‖₂² with s the configured smoothing order.
    pub smoothing_density: f64,
    /// Trapezoid contribution of the density since the previous row.
    pub smoothing_increment: f64,
    pub laplacian: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kstar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub self_adjoint_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_z: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    NormBlowup { t: f64 },
    StepFailure { t: f64, reason: String },
    /// Quasilinear coefficients were requested outside the r₀ ball.
    RangeExit { t: f64, max_z: f64, r0: f64 },
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::NormBlowup { .. } => "norm_blowup",
            Termination::StepFailure { .. } => "step_failure",
            Termination::RangeExit { .. } => "range_exit",
        }
    }

    pub fn is_completed(&self) -> bool {
        matches!(self, Termination::Completed)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: ModelSpec,
    pub config: SolverConfig,
    pub rows: Vec<RecordRow>,
    pub termination: Termination,
    /// Fields kept for diagnostics; persisted separately as binary snapshots.
    #[serde(skip)]
    pub snapshots: Vec<Snapshot>,
}

const CSV_FIXED: [&str; 4] = ["t", "l2", "smoothing_density", "smoothing_increment"];

impl RunRecord {
    /// Last recorded time.
    pub fn t_end(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.t)
    }

    pub fn sup_l2(&self) -> f64 {
        self.rows.iter().map(|r| r.l2).fold(0.0, f64::max)
    }

    /// Sum of the trapezoid increments: ∫‖⟨x⟩^{−Ñ/2}J^s u‖₂² dt over the run.
    pub fn smoothing_integral(&self) -> f64 {
        self.rows.iter().map(|r| r.smoothing_increment).sum()
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut h: Vec<String> = CSV_FIXED.iter().map(|s| s.to_string()).collect();
        for n in &self.config.tracked_norms {
            h.push(format!("norm_s{}_w{}", n.s, n.weight));
        }
        h.extend(["laplacian", "kstar", "e_r", "self_adjoint_residual", "max_z"].map(String::from));
        h
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{}", self.csv_header().join(","))?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.17e}"));
        for r in &self.rows {
            let mut cells = vec![
                format!("{:.17e}", r.t),
                format!("{:.17e}", r.l2),
                format!("{:.17e}", r.smoothing_density),
                format!("{:.17e}", r.smoothing_increment),
            ];
            cells.extend(r.tracked.iter().map(|v| format!("{v:.17e}")));
            cells.push(format!("{:.17e}", r.laplacian));
            cells.extend([opt(r.kstar), opt(r.e_r), opt(r.self_adjoint_residual), opt(r.max_z)]);
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii csv")
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        write_atomic(path, &serde_json::to_vec_pretty(self)?)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv_string().as_bytes())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

/// Writes through a temporary file in the same directory and renames it into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ContinuationVerdict {
    /// Run stayed in the admissible region; `doubling_time` is the first time the size
    /// functional reached twice its initial value, if it did.
    WithinTheory { doubling_time: Option<f64> },
    LeftBall { t_exit: f64 },
    Blowup { t: f64 },
}

/// Classifies a run using the size functional λ(t) = max over the tracked norms (‖u‖₂ when none
/// are tracked). λ above `lambda_threshold` or a range exit counts as leaving the ball.
pub fn continuation_monitor(record: &RunRecord, lambda_threshold: f64) -> ContinuationVerdict {
    let lambda = |r: &RecordRow| r.tracked.iter().copied().fold(r.l2, f64::max);
    match &record.termination {
        Termination::NormBlowup { t } | Termination::StepFailure { t, .. } => return ContinuationVerdict::Blowup { t: *t },
        Termination::RangeExit { t, .. } => return ContinuationVerdict::LeftBall { t_exit: *t },
        Termination::Completed => {}
    }
    if let Some(r) = record.rows.iter().find(|r| lambda(r) > lambda_threshold) {
        return ContinuationVerdict::LeftBall { t_exit: r.t };
    }
    let doubling_time = record.rows.first().and_then(|first| {
        let l0 = lambda(first);
        (l0 > 0.0).then(|| record.rows.iter().find(|r| lambda(r) >= 2.0 * l0).map(|r| r.t)).flatten()
    });
    ContinuationVerdict::WithinTheory { doubling_time }
}
