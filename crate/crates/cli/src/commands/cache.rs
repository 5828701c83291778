use uhs_core::diagnostics::{er_cache_path, load_er_operator};

use super::{apply_mode, Outcome};
use crate::config::LoadedConfig;
use crate::error::CliResult;
use crate::manifest::ManifestBuilder;

/// Builds the order-zero ray table of every (grid, radius) pair in the sweep.
pub fn run(lc: &LoadedConfig) -> CliResult<Outcome> {
    let cfg = &lc.config;
    let dir = lc.cache_dir();
    let model = cfg.build_model();
    let mut manifest = ManifestBuilder::new(&lc.output_dir(), "cache", &lc.hash);
    let (mut built, mut present) = (0, 0);
    for points in cfg.grid_points() {
        let grid = cfg.grid_for(points);
        for r in cfg.radii() {
            let path = er_cache_path(&model, r, &grid, &dir, cfg.cache.resolution)?;
            if path.exists() {
                present += 1;
                continue;
            }
            load_er_operator(&model, r, &grid, &dir, cfg.cache.resolution, apply_mode(lc), true, true)?;
            manifest.cache(&path);
            built += 1;
        }
    }
    manifest.finish()?;
    println!("cache: {built} built, {present} already present in {}", dir.display());
    Ok(Outcome::Success)
}
