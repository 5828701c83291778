use std::path::PathBuf;

use rayon::prelude::*;

use uhs_core::diagnostics::{er_cache_path, load_er_operator};
use uhs_core::solver::{solve_linear, solve_quasilinear, Observers};
use uhs_core::{LinearProblem, QuasilinearProblem, RunRecord};

use super::{apply_mode, pool, record_path, run_dir, run_label, Outcome};
use crate::config::{LoadedConfig, RunPoint};
use crate::error::CliResult;
use crate::manifest::{ManifestBuilder, RunEntry, RunStatus};

struct Done {
    point: RunPoint,
    hash: String,
    status: RunStatus,
    termination: String,
}

fn compute(lc: &LoadedConfig, point: &RunPoint, hash: &str) -> CliResult<RunRecord> {
    let cfg = &lc.config;
    let grid = cfg.grid_for(point.points);
    let model = cfg.build_model();
    let u0 = cfg.initial_field(grid, point.amplitude)?;
    let solver = cfg.solver_config(point.epsilon, grid);
    let er = match point.radius {
        Some(r) => {
            let (_, er) = load_er_operator(&model, r, &grid, &lc.cache_dir(), cfg.cache.resolution, apply_mode(lc), true, false)?;
            Some(er)
        }
        None => None,
    };
    let observers = Observers { er: er.as_ref() };
    let record = if model.is_quasilinear() {
        solve_quasilinear(&QuasilinearProblem::new(model, u0)?, &solver, observers)?
    } else {
        solve_linear(&LinearProblem::new(model, u0)?, &solver, observers)?
    };
    let dir = run_dir(&lc.output_dir(), hash);
    record.save_json(&dir.join("record.json"))?;
    record.save_csv(&dir.join("record.csv"))?;
    Ok(record)
}

/// Builds missing ray tables one at a time before the runs are dispatched; returns the new files.
fn ensure_tables(lc: &LoadedConfig, points: &[(RunPoint, String)], force: bool) -> CliResult<Vec<PathBuf>> {
    let cfg = &lc.config;
    let model = cfg.build_model();
    let dir = lc.cache_dir();
    let mut created = Vec::new();
    for (p, hash) in points {
        let Some(r) = p.radius else { continue };
        if !force && record_path(&lc.output_dir(), hash).exists() {
            continue;
        }
        let grid = cfg.grid_for(p.points);
        let path = er_cache_path(&model, r, &grid, &dir, cfg.cache.resolution)?;
        if !path.exists() {
            load_er_operator(&model, r, &grid, &dir, cfg.cache.resolution, apply_mode(lc), true, true)?;
            created.push(path);
        }
    }
    Ok(created)
}

pub fn run(lc: &LoadedConfig, force: bool, jobs: Option<usize>) -> CliResult<Outcome> {
    let cfg = &lc.config;
    let out = lc.output_dir();
    let mut manifest = ManifestBuilder::new(&out, "solve", &lc.hash);
    let points: Vec<(RunPoint, String)> = cfg.run_points().into_iter().map(|p| (p, cfg.run_hash(&p))).collect();

    // Stability and well-posedness are checked for every point before any compute.
    for (p, _) in &points {
        let grid = cfg.grid_for(p.points);
        let u0 = cfg.initial_field(grid, p.amplitude)?;
        cfg.solver_config(p.epsilon, grid).check_stability(&cfg.build_model(), &u0)?;
    }

    for c in ensure_tables(lc, &points, force)? {
        manifest.cache(&c);
    }
    let workers = pool(jobs)?;
    let results: Vec<CliResult<Done>> = workers.install(|| {
        points
            .par_iter()
            .map(|(point, hash)| {
                let path = record_path(&out, hash);
                if path.exists() && !force {
                    let record = RunRecord::load_json(&path)?;
                    return Ok(Done {
                        point: *point,
                        hash: hash.clone(),
                        status: RunStatus::Cached,
                        termination: record.termination.label().to_string(),
                    });
                }
                let record = compute(lc, point, hash)?;
                Ok(Done {
                    point: *point,
                    hash: hash.clone(),
                    status: RunStatus::Computed,
                    termination: record.termination.label().to_string(),
                })
            })
            .collect()
    });
    let mut computed = 0;
    let mut cached = 0;
    for r in results {
        let d = r?;
        let dir = run_dir(&out, &d.hash);
        manifest.record(&dir.join("record.json"));
        manifest.record(&dir.join("record.csv"));
        match d.status {
            RunStatus::Computed => computed += 1,
            RunStatus::Cached => cached += 1,
        }
        println!("run {} [{}]: {} ({})", d.hash, run_label(&d.point), d.termination, if d.status == RunStatus::Cached { "cached" } else { "computed" });
        manifest.run(RunEntry { run_hash: d.hash, point: d.point, status: d.status, termination: d.termination });
    }
    let (path, _) = manifest.finish()?;
    println!("solve: {computed} computed, {cached} cached; manifest {}", path.display());
    Ok(Outcome::Success)
}
