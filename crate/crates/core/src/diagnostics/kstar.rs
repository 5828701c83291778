use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::EstimateReport;
use crate::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::solver::RunRecord;
use crate::symbols::{truncate, ApplyMode, B1Variant, ErOperator, IntegratingFactor, RaySymbol, RaySymbolOptions, RayTable};

/// Builds E^R for `model` truncated at `radius` from the cached order-zero ray table in
/// `cache_dir`. Without `allow_build` a missing table is an error naming the cache entry.
#[allow(clippy::too_many_arguments)]
pub fn load_er_operator(
    model: &CoefficientModel,
    radius: f64,
    grid: &Grid,
    cache_dir: &Path,
    resolution: usize,
    mode: ApplyMode,
    symmetrize: bool,
    allow_build: bool,
) -> Result<(IntegratingFactor, ErOperator)> {
    let sym = RaySymbol::new(truncate(model, radius)?, B1Variant::OrderZero, RaySymbolOptions::default());
    let table = RayTable::load_or_build(cache_dir, &sym, grid, resolution, 1, allow_build)?;
    let factor = IntegratingFactor::from_table(Arc::new(table), symmetrize);
    let er = ErOperator::from_factor(&factor, *grid, mode)?;
    Ok((factor, er))
}

/// Cache file that [`load_er_operator`] reads or writes for the same arguments.
pub fn er_cache_path(model: &CoefficientModel, radius: f64, grid: &Grid, cache_dir: &Path, resolution: usize) -> Result<PathBuf> {
    let sym = RaySymbol::new(truncate(model, radius)?, B1Variant::OrderZero, RaySymbolOptions::default());
    Ok(RayTable::cache_path(cache_dir, &RayTable::key_for(&sym, grid, resolution, 1)?))
}

/// Per-snapshot ‖u‖₂, ‖(K^R)^*u‖₂, ‖E^R u‖₂ and the reconstruction residual
/// ‖u‖₂ − ‖E^R u‖₂ − C_K‖(K^R)^*u‖₂ (nonpositive when the bound holds).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KstarTrack {
    pub t: Vec<f64>,
    pub l2: Vec<f64>,
    pub kstar: Vec<f64>,
    pub e_r: Vec<f64>,
    pub residual: Vec<f64>,
    /// Measured ‖Ψ_{k̃}‖.
    pub c_k: f64,
    /// Smallest K₀ ≥ 0 with ‖(K^R)^*u(t)‖₂² ≤ ‖(K^R)^*u(0)‖₂² e^{K₀t} at every sample.
    pub k0: f64,
}

const RECONSTRUCTION_SLACK: f64 = 1e-8;

/// Tracks the K/E energy chain along a run, from its snapshots or, when none were kept, from the
/// ‖(K^R)^*u‖₂ and ‖E^R u‖₂ columns recorded during the run.
pub fn kstar_energy_track(
    record: &RunRecord,
    er: &ErOperator,
    norm_iterations: usize,
    seed: u64,
) -> Result<(KstarTrack, EstimateReport)> {
    let mut track = KstarTrack { t: vec![], l2: vec![], kstar: vec![], e_r: vec![], residual: vec![], c_k: 0.0, k0: 0.0 };
    if !record.snapshots.is_empty() {
        for s in &record.snapshots {
            track.t.push(s.t);
            track.l2.push(s.field.l2_norm());
            track.kstar.push(er.k_adjoint(&s.field)?.l2_norm());
            track.e_r.push(er.apply(&s.field)?.l2_norm());
        }
    } else {
        for r in &record.rows {
            let (Some(k), Some(e)) = (r.kstar, r.e_r) else {
                return Err(Error::Insufficient("run has neither snapshots nor recorded K*/E^R norms".into()));
            };
            track.t.push(r.t);
            track.l2.push(r.l2);
            track.kstar.push(k);
            track.e_r.push(e);
        }
    }
    if track.t.is_empty() {
        return Err(Error::Insufficient("run has no samples".into()));
    }
    track.c_k = er.k_tilde_norm(norm_iterations, seed)?;
    track.residual = (0..track.t.len()).map(|i| track.l2[i] - track.e_r[i] - track.c_k * track.kstar[i]).collect();
    let k_init = track.kstar[0];
    if k_init > 0.0 {
        track.k0 = (1..track.t.len())
            .filter(|&i| track.t[i] > track.t[0])
            .map(|i| 2.0 * (track.kstar[i] / k_init).ln() / (track.t[i] - track.t[0]))
            .fold(0.0, f64::max);
    }
    let mut worst = (0usize, f64::NEG_INFINITY);
    for i in 0..track.t.len() {
        let bound = track.e_r[i] + track.c_k * track.kstar[i];
        let r = super::ratio_of(track.l2[i], bound);
        if r > worst.1 {
            worst = (i, r);
        }
    }
    let i = worst.0;
    let lhs = track.l2[i];
    let rhs = track.e_r[i] + track.c_k * track.kstar[i];
    let report = EstimateReport::new("kstar_energy", lhs, rhs, worst.1 <= 1.0 + RECONSTRUCTION_SLACK)
        .with("c_k", track.c_k)
        .with("k0", track.k0)
        .with("epsilon", record.config.epsilon)
        .with("grid_points", record.config.grid.points_per_axis() as f64);
    Ok((track, report))
}
