use std::path::Path;

use uhs_core::diagnostics::write_sweep_csv;
use uhs_core::EstimateReport;

use super::verify::{emit_plot, ratio_series};
use super::{load_runs, norm_plot, Outcome};
use crate::config::LoadedConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{write_atomic, ManifestBuilder};
use crate::plot::{Plot, Series};

pub const SUMMARY_HEADER: &str =
    "run_hash,epsilon,grid_points,amplitude,radius,termination,t_end,l2_initial,l2_final,sup_l2,smoothing_integral";

/// Writes a per-run summary table, the norm plot and, when `verify` has run, the estimate table
/// and the ratio-vs-ε plot into `target`.
pub fn run(lc: &LoadedConfig, target: &Path) -> CliResult<Outcome> {
    let runs = load_runs(lc)?;
    let mut manifest = ManifestBuilder::new(target, "report", &lc.hash);

    let mut summary = format!("{SUMMARY_HEADER}\n");
    for r in &runs {
        let rows = &r.record.rows;
        let first = rows.first().map_or(0.0, |x| x.l2);
        let last = rows.last().map_or(0.0, |x| x.l2);
        summary.push_str(&format!(
            "{},{:e},{},{},{},{},{:e},{:e},{:e},{:e},{:e}\n",
            r.hash,
            r.point.epsilon,
            r.point.points,
            r.point.amplitude,
            r.point.radius.map_or(String::new(), |v| v.to_string()),
            r.record.termination.label(),
            r.record.t_end(),
            first,
            last,
            r.record.sup_l2(),
            r.record.smoothing_integral()
        ));
    }
    let path = target.join("summary.csv");
    write_atomic(&path, summary.as_bytes())?;
    manifest.table(&path);
    if !runs.is_empty() {
        emit_plot(&mut manifest, &norm_plot(&runs), target, "norm_vs_time")?;
    }

    let estimates_path = lc.output_dir().join("reports").join(lc.short_hash()).join("estimates.json");
    if estimates_path.exists() {
        let bytes = std::fs::read(&estimates_path).map_err(|e| CliError::io(format!("reading {}", estimates_path.display()), e))?;
        let reports: Vec<EstimateReport> =
            serde_json::from_slice(&bytes).map_err(|e| CliError::Internal(format!("{}: {e}", estimates_path.display())))?;
        let mut csv = Vec::new();
        write_sweep_csv(&reports, &mut csv)?;
        let path = target.join("estimates.csv");
        write_atomic(&path, &csv)?;
        manifest.table(&path);
        let mut plot = Plot { x_label: "epsilon".into(), y_label: "ratio".into(), log_x: true, ..Default::default() };
        for r in reports.iter().filter(|r| r.name == "smoothing") {
            let pts = ratio_series(r);
            let label = format!("M={} amp={}", r.parameters.get("grid_points").unwrap_or(&0.0), r.parameters.get("amplitude").unwrap_or(&1.0));
            plot.series.push(Series { label, points: pts });
        }
        if !plot.series.is_empty() {
            emit_plot(&mut manifest, &plot, target, "ratio_vs_epsilon")?;
        }
    } else {
        println!("note: no estimates found; run `uhs verify` first to include them");
    }
    let (path, m) = manifest.finish()?;
    println!("report: {} runs, {} files; manifest {}", runs.len(), m.artifacts.all().count(), path.display());
    Ok(Outcome::Success)
}
