use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uhs_core::diagnostics::{
    garding_commutator_probe, interpolation_check, kstar_energy_track, load_er_operator, smoothing_estimate_from_records,
    write_sweep_csv,
};
use uhs_core::rays::{escape_function_flat, GardingOptions};
use uhs_core::solver::{continuation_monitor, ContinuationVerdict};
use uhs_core::{ComplexField, EstimateReport, Grid, LinearProblem, RunRecord};

use super::{apply_mode, load_runs, norm_plot, run_label, Outcome, StoredRun};
use crate::config::{EstimateKind, LoadedConfig};
use crate::error::CliResult;
use crate::manifest::{write_atomic, write_json, ManifestBuilder};
use crate::plot::{data_csv, render_png, Plot, Series};

/// Alternating white-noise and smooth random fields, deterministic in `seed`.
fn interpolation_fields(grid: Grid, count: usize, seed: u64) -> Vec<ComplexField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = grid.half_width();
    (0..count)
        .map(|i| {
            if i % 2 == 0 {
                ComplexField::from_fn(grid, |_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            } else {
                let bumps: Vec<(Vec<f64>, f64, Complex64)> = (0..4)
                    .map(|_| {
                        let c = (0..grid.dim()).map(|_| half * (rng.random::<f64>() - 0.5)).collect();
                        (c, 0.5 + 2.0 * rng.random::<f64>(), Complex64::new(rng.random::<f64>(), rng.random::<f64>()))
                    })
                    .collect();
                ComplexField::from_fn(grid, |x| {
                    bumps
                        .iter()
                        .map(|(c, w, a)| {
                            let r2: f64 = x.iter().zip(c).map(|(p, q)| (p - q) * (p - q)).sum();
                            a * (-r2 / (w * w)).exp()
                        })
                        .sum()
                })
            }
        })
        .collect()
}

/// Runs that differ only in ε, ordered by decreasing ε.
fn epsilon_groups(runs: &[StoredRun]) -> Vec<Vec<&StoredRun>> {
    let mut groups: Vec<Vec<&StoredRun>> = Vec::new();
    for r in runs {
        let same = |g: &Vec<&StoredRun>| {
            let p = &g[0].point;
            p.points == r.point.points && p.amplitude == r.point.amplitude && p.radius == r.point.radius
        };
        match groups.iter_mut().find(|g| same(g)) {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    for g in &mut groups {
        g.sort_by(|a, b| b.point.epsilon.total_cmp(&a.point.epsilon));
    }
    groups
}

fn with_point(report: EstimateReport, run: &StoredRun) -> EstimateReport {
    let p = &run.point;
    let mut r = report.with("epsilon", p.epsilon).with("grid_points", p.points as f64).with("amplitude", p.amplitude);
    if let Some(radius) = p.radius {
        r = r.with("radius", radius);
    }
    r
}

/// ε ↦ ratio pairs stored in a smoothing report's `ratio[eps=…]` parameters.
pub(crate) fn ratio_series(report: &EstimateReport) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = report
        .parameters
        .iter()
        .filter_map(|(k, v)| k.strip_prefix("ratio[eps=")?.strip_suffix(']')?.parse::<f64>().ok().map(|e| (e, *v)))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}

fn continuation_report(run: &StoredRun, threshold: f64) -> EstimateReport {
    let record: &RunRecord = &run.record;
    let lambda = record.rows.iter().map(|r| r.tracked.iter().copied().fold(r.l2, f64::max)).fold(0.0, f64::max);
    let verdict = continuation_monitor(record, threshold);
    let mut report = EstimateReport::new("continuation", lambda, threshold, matches!(verdict, ContinuationVerdict::WithinTheory { .. }));
    report.notes.push(serde_json::to_string(&verdict).expect("verdict serializes"));
    with_point(report, run)
}

pub fn run(lc: &LoadedConfig) -> CliResult<Outcome> {
    let cfg = &lc.config;
    let out = lc.output_dir();
    let dir = out.join("reports").join(lc.short_hash());
    let runs = if cfg.needs_runs() { load_runs(lc)? } else { vec![] };
    let model = cfg.build_model();
    let mut manifest = ManifestBuilder::new(&out, "verify", &lc.hash);
    let mut reports = Vec::new();
    let mut ratio_plot = Plot { x_label: "epsilon".into(), y_label: "ratio".into(), log_x: true, ..Default::default() };

    for kind in &cfg.diagnostics.estimates {
        match kind {
            EstimateKind::Interpolation => {
                for points in cfg.grid_points() {
                    let grid = cfg.grid_for(points);
                    let fields = interpolation_fields(grid, cfg.diagnostics.interpolation_fields, cfg.seed);
                    reports.push(interpolation_check(&fields).with("grid_points", points as f64));
                }
            }
            EstimateKind::Garding => {
                let p = escape_function_flat(cfg.model.signature, cfg.diagnostics.ntilde)?;
                let grid = cfg.grid_for(cfg.grid.points);
                let opts = GardingOptions { seed: cfg.seed, ..GardingOptions::for_grid(&grid) };
                let (mut report, worst) =
                    garding_commutator_probe(&model, &p, cfg.diagnostics.garding_t, cfg.diagnostics.garding_samples, &opts)?;
                report.notes.push(format!("worst sample at x = {:?}, xi = {:?}", worst.x, worst.xi));
                reports.push(report);
            }
            EstimateKind::Smoothing => {
                for group in epsilon_groups(&runs) {
                    let first = group[0];
                    let grid = cfg.grid_for(first.point.points);
                    let problem = LinearProblem::new(model.clone(), cfg.initial_field(grid, first.point.amplitude)?)?;
                    let records: Vec<RunRecord> = group.iter().map(|r| r.record.clone()).collect();
                    let mut report = smoothing_estimate_from_records(&problem, &records, cfg.diagnostics.smoothing_rhs)?
                        .with("amplitude", first.point.amplitude);
                    if let Some(r) = first.point.radius {
                        report = report.with("radius", r);
                    }
                    let label = format!("M={} amp={}", first.point.points, first.point.amplitude);
                    ratio_plot.series.push(Series { label, points: ratio_series(&report) });
                    reports.push(report);
                }
            }
            EstimateKind::Kstar => {
                for run in &runs {
                    let Some(radius) = run.point.radius else { continue };
                    let grid = cfg.grid_for(run.point.points);
                    let (_, er) =
                        load_er_operator(&model, radius, &grid, &lc.cache_dir(), cfg.cache.resolution, apply_mode(lc), true, false)?;
                    let (track, report) = kstar_energy_track(&run.record, &er, cfg.diagnostics.norm_iterations, cfg.seed)?;
                    let path = dir.join(format!("kstar_{}.json", run.hash));
                    write_json(&path, &track)?;
                    manifest.report(&path);
                    reports.push(with_point(report, run));
                }
            }
            EstimateKind::Continuation => {
                for run in &runs {
                    reports.push(continuation_report(run, cfg.diagnostics.lambda_threshold));
                }
            }
        }
    }

    let estimates = dir.join("estimates.json");
    write_json(&estimates, &reports)?;
    manifest.report(&estimates);
    let mut csv = Vec::new();
    write_sweep_csv(&reports, &mut csv)?;
    let sweep = dir.join("sweep.csv");
    write_atomic(&sweep, &csv)?;
    manifest.table(&sweep);
    if !runs.is_empty() {
        emit_plot(&mut manifest, &norm_plot(&runs), &dir, "norm_vs_time")?;
    }
    if !ratio_plot.series.is_empty() {
        emit_plot(&mut manifest, &ratio_plot, &dir, "ratio_vs_epsilon")?;
    }
    manifest.finish()?;

    let mut violated = 0;
    for r in &reports {
        let mut where_ = String::new();
        for key in ["epsilon", "grid_points", "amplitude", "radius"] {
            if let Some(v) = r.parameters.get(key) {
                where_.push_str(&format!(" {key}={v}"));
            }
        }
        println!("{:<14} ratio {:>12.6e} {}{}", r.name, r.ratio, r.verdict.label(), where_);
        if !r.verdict.is_bounded() {
            violated += 1;
        }
    }
    println!("verify: {} estimates, {violated} violated; reports in {}", reports.len(), dir.display());
    if !runs.is_empty() {
        for run in &runs {
            if !run.record.termination.is_completed() {
                println!("note: run {} [{}] ended with {}", run.hash, run_label(&run.point), run.record.termination.label());
            }
        }
    }
    Ok(if violated == 0 { Outcome::Success } else { Outcome::Violations(violated) })
}

pub(crate) fn emit_plot(manifest: &mut ManifestBuilder, plot: &Plot, dir: &std::path::Path, stem: &str) -> CliResult<()> {
    let png = dir.join(format!("{stem}.png"));
    render_png(plot, &png)?;
    manifest.plot(&png);
    let csv = dir.join(format!("{stem}.csv"));
    write_atomic(&csv, data_csv(plot).as_bytes())?;
    manifest.table(&csv);
    Ok(())
}
