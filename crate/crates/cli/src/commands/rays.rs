use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uhs_core::rays::{classify_trapping, ichinose_functional, integrate_ray, FrozenMetric, PhasePoint, Trapping};

use super::Outcome;
use crate::config::LoadedConfig;
use crate::error::CliResult;
use crate::manifest::{write_atomic, write_json, ManifestBuilder};

/// Configured seeds followed by `random` seeds drawn from the configuration seed.
pub fn seeds(lc: &LoadedConfig) -> Vec<PhasePoint> {
    let cfg = &lc.config;
    let n = cfg.model.signature.dim();
    let mut out = cfg.rays.seeds.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.rays.random {
        let x: Vec<f64> = (0..n).map(|_| cfg.rays.seed_box * (rng.random::<f64>() - 0.5)).collect();
        let xi = loop {
            let v: Vec<f64> = (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if r > 0.1 && r <= 1.0 {
                break v.iter().map(|c| c / r).collect();
            }
        };
        out.push(PhasePoint { x, xi });
    }
    out
}

pub fn run(lc: &LoadedConfig) -> CliResult<Outcome> {
    let cfg = &lc.config;
    let out = lc.output_dir();
    let dir = out.join("rays").join(lc.short_hash());
    let model = cfg.build_model();
    let seeds = seeds(lc);
    let rho = cfg.rays.rho_escape.unwrap_or(model.flat_radius());
    let mut manifest = ManifestBuilder::new(&out, "rays", &lc.hash);

    let verdicts = classify_trapping(&FrozenMetric::new(&model, 0.0), &seeds, cfg.rays.s_max, rho, cfg.rays.tol)?;
    let trapping = dir.join("trapping.json");
    write_json(&trapping, &verdicts)?;
    manifest.report(&trapping);

    if cfg.rays.trajectories {
        for (i, seed) in seeds.iter().enumerate() {
            let traj = integrate_ray(&model, seed, cfg.rays.s_max, rho, cfg.rays.tol)?;
            let path = dir.join(format!("trajectory_{i:04}.csv"));
            write_atomic(&path, traj.to_csv().as_bytes())?;
            manifest.trajectory(&path);
        }
    }
    if !cfg.rays.ichinose_radii.is_empty() && !seeds.is_empty() {
        let samples: Vec<(Vec<f64>, Vec<f64>)> = seeds
            .iter()
            .map(|s| {
                let r = s.xi.iter().map(|c| c * c).sum::<f64>().sqrt();
                (s.x.clone(), s.xi.iter().map(|c| c / r).collect())
            })
            .collect();
        let report = ichinose_functional(&model, &samples, &cfg.rays.ichinose_radii, cfg.rays.tol)?;
        let path = dir.join("ichinose.json");
        write_json(&path, &report)?;
        manifest.report(&path);
        println!("ichinose functional: {:.6e}", report.value);
    }
    let count = |f: fn(&Trapping) -> bool| verdicts.iter().filter(|v| f(&v.verdict)).count();
    let escaped = count(|t| matches!(t, Trapping::Escaped { .. }));
    let undecided = count(|t| matches!(t, Trapping::Undecided));
    let failed = count(|t| matches!(t, Trapping::Failed { .. }));
    manifest.finish()?;
    println!("rays: {} seeds, {escaped} escaped, {undecided} undecided, {failed} failed (s_max = {}, rho = {rho})", seeds.len(), cfg.rays.s_max);
    Ok(Outcome::Success)
}
