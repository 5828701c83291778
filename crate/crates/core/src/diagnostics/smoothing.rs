use serde::{Deserialize, Serialize};

use super::{ratio_of, EstimateReport};
use crate::error::{Error, Result};
use crate::field::{weighted_norm, ComplexField};
use crate::solver::{solve_linear, LinearProblem, Observers, RunRecord, Snapshot, SolverConfig};

/// Trapezoid rule in time of ‖⟨x⟩^{−Ñ/2}J^s u(t)‖₂² over the snapshots.
pub fn smoothing_functional(snapshots: &[Snapshot], s: f64, ntilde: f64) -> Result<f64> {
    if snapshots.len() < 2 {
        return Err(Error::Insufficient(format!("smoothing functional needs at least 2 snapshots, got {}", snapshots.len())));
    }
    if snapshots.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::Precondition("snapshot times must increase".into()));
    }
    let density = |f: &ComplexField| weighted_norm(f, s, -ntilde / 2.0).powi(2);
    let d: Vec<f64> = snapshots.iter().map(|sn| density(&sn.field)).collect();
    Ok(snapshots.windows(2).zip(d.windows(2)).map(|(w, dv)| 0.5 * (dv[0] + dv[1]) * (w[1].t - w[0].t)).sum())
}

/// Right side of the smoothing inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingRhs {
    /// ‖u₀‖₂ + ∫₀^T‖f(t)‖₂dt.
    #[default]
    Forcing,
    /// ‖u₀‖₂ + (∫₀^T‖⟨x⟩^{−Ñ/2}J^{−1/2}f(t)‖₂²dt)^{1/2}.
    WeightedForcing,
}

const FORCING_PANELS: usize = 64;

fn forcing_term(problem: &LinearProblem, cfg: &SolverConfig, rhs: SmoothingRhs) -> f64 {
    if !problem.model.has_forcing() || cfg.t_final == 0.0 {
        return 0.0;
    }
    let f_at = |t: f64| ComplexField::from_fn(cfg.grid, |x| problem.model.forcing(x, t));
    let h = cfg.t_final / FORCING_PANELS as f64;
    let value = |t: f64| match rhs {
        SmoothingRhs::Forcing => f_at(t).l2_norm(),
        SmoothingRhs::WeightedForcing => weighted_norm(&f_at(t), -0.5, -cfg.smoothing_weight / 2.0).powi(2),
    };
    let vals: Vec<f64> = (0..=FORCING_PANELS).map(|i| value(i as f64 * h)).collect();
    let integral: f64 = vals.windows(2).map(|w| 0.5 * (w[0] + w[1]) * h).sum();
    match rhs {
        SmoothingRhs::Forcing => integral,
        SmoothingRhs::WeightedForcing => integral.sqrt(),
    }
}

/// Runs every configuration and compares lhs = sup‖u‖₂ + (∫‖⟨x⟩^{−Ñ/2}J^s u‖₂²)^{1/2} with the
/// data size. Bounded when all runs complete and the ratio varies by less than 20% across them.
pub fn smoothing_estimate_check(
    problem: &LinearProblem,
    configs: &[SolverConfig],
    s: f64,
    rhs_form: SmoothingRhs,
) -> Result<EstimateReport> {
    let mut records = Vec::with_capacity(configs.len());
    for cfg in configs {
        let cfg = SolverConfig { smoothing_order: s, ..cfg.clone() };
        records.push(solve_linear(problem, &cfg, Observers::default())?);
    }
    smoothing_estimate_from_records(problem, &records, rhs_form)
}

/// The same comparison over runs that were already computed from `problem`.
pub fn smoothing_estimate_from_records(
    problem: &LinearProblem,
    records: &[RunRecord],
    rhs_form: SmoothingRhs,
) -> Result<EstimateReport> {
    let first = &records.first().ok_or_else(|| Error::Precondition("empty configuration sweep".into()))?.config;
    if records.iter().any(|r| {
        r.config.t_final != first.t_final
            || !r.config.grid.same_as(&first.grid)
            || r.config.smoothing_order != first.smoothing_order
            || r.config.smoothing_weight != first.smoothing_weight
    }) {
        return Err(Error::Precondition("all runs must share the horizon, grid and smoothing norm".into()));
    }
    let n0 = problem.u0.l2_norm();
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for rec in records {
        let cfg = &rec.config;
        if !rec.termination.is_completed() {
            notes.push(format!("run with epsilon = {} ended early: {}", cfg.epsilon, rec.termination.label()));
        }
        let lhs = rec.sup_l2() + rec.smoothing_integral().sqrt();
        let rhs = n0 + forcing_term(problem, cfg, rhs_form);
        rows.push((cfg.epsilon, lhs, rhs, ratio_of(rec.sup_l2(), n0), rec.termination.is_completed()));
    }
    let ratios: Vec<f64> = rows.iter().map(|r| ratio_of(r.1, r.2)).collect();
    let (imax, rmax) = ratios.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, r)| if r > b.1 { (i, r) } else { b });
    let rmin = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let variation = if rmin > 0.0 { (rmax - rmin) / rmin } else if rmax == 0.0 { 0.0 } else { f64::INFINITY };
    let all_completed = rows.iter().all(|r| r.4);
    let (_, lhs, rhs, _, _) = rows[imax];
    let mut report = EstimateReport::new("smoothing", lhs, rhs, all_completed && variation < 0.2)
        .with("variation", variation)
        .with("s", first.smoothing_order)
        .with("ntilde", first.smoothing_weight)
        .with("t_final", first.t_final)
        .with("grid_points", first.grid.points_per_axis() as f64);
    for (i, (eps, _, _, sup_ratio, _)) in rows.iter().enumerate() {
        report = report.with(&format!("ratio[eps={eps:e}]"), ratios[i]).with(&format!("sup_ratio[eps={eps:e}]"), *sup_ratio);
    }
    if rows.len() == 1 {
        report = report.with("epsilon", rows[0].0);
    }
    report.notes = notes;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{ForcingSpec, ModelSpec};
    use crate::grid::{Grid, Signature};
    use crate::solver::Scheme;
    use num_complex::Complex64;

    fn sig() -> Signature {
        Signature::new(2, 1).unwrap()
    }

    #[test]
    fn needs_two_snapshots() {
        let g = Grid::new(2, 4.0, 8).unwrap();
        let one = vec![Snapshot { t: 0.0, field: ComplexField::zeros(g) }];
        assert!(matches!(smoothing_functional(&one, 0.5, 2.0), Err(Error::Insufficient(_))));
        let zeros = vec![one[0].clone(), Snapshot { t: 1.0, field: ComplexField::zeros(g) }];
        assert_eq!(smoothing_functional(&zeros, 0.5, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn constant_plane_wave_closed_form() {
        let g = Grid::new(2, 6.0, 16).unwrap();
        let k = [2i64, -3];
        let w = ComplexField::plane_wave(g, &k).unwrap();
        let snaps: Vec<Snapshot> = (0..=4).map(|i| Snapshot { t: i as f64 * 0.25, field: w.clone() }).collect();
        let s = 0.5;
        let mut xi = [0.0; 3];
        g.frequency(g.slot_of_wavenumbers(&k).unwrap(), &mut xi);
        let bracket = 1.0 + xi[0] * xi[0] + xi[1] * xi[1];
        // |e^{iξx}|² = |amplitude|², so the density is ⟨ξ⟩^{2s} · Σ h² |w|² ⟨x⟩^{−2}.
        let amp2 = w.values()[0].norm_sqr();
        let mut x = [0.0; 3];
        let weight_sum: f64 = (0..g.len())
            .map(|i| {
                g.position(i, &mut x);
                1.0 / (1.0 + x[0] * x[0] + x[1] * x[1])
            })
            .sum();
        let expected = bracket.powf(s) * amp2 * g.cell_volume() * weight_sum;
        let got = smoothing_functional(&snaps, s, 2.0).unwrap();
        assert!((got - expected).abs() < 1e-10 * expected, "{got} vs {expected}");
    }

    #[test]
    fn flat_sweep_has_unit_sup_ratio() {
        let g = Grid::new(2, 8.0, 32).unwrap();
        let model = ModelSpec::flat(sig()).build(8.0).unwrap();
        let u0 = ComplexField::from_fn(g, |x| Complex64::new((-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp(), 0.0));
        let p = LinearProblem::new(model, u0).unwrap();
        let configs: Vec<SolverConfig> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&e| SolverConfig::new(e, 2e-3, 0.2, Scheme::ImexRk2, g).unwrap())
            .collect();
        let r = smoothing_estimate_check(&p, &configs, 0.5, SmoothingRhs::Forcing).unwrap();
        assert!(r.verdict.is_bounded(), "{r:?}");
        for e in [1e-2, 1e-3, 1e-4] {
            let sup = r.parameters[&format!("sup_ratio[eps={e:e}]")];
            assert!((sup - 1.0).abs() < 1e-6, "{e}: {sup}");
        }
    }

    #[test]
    fn forcing_enters_the_right_side() {
        let g = Grid::new(2, 8.0, 32).unwrap();
        let f = ForcingSpec { re: 0.5, im: 0.0, width: 1.0, center: vec![], omega: 2.0 };
        let model = ModelSpec::flat(sig()).with_forcing(f).build(8.0).unwrap();
        let p = LinearProblem::new(model, ComplexField::zeros(g)).unwrap();
        let cfg = SolverConfig::new(1e-3, 2e-3, 0.2, Scheme::ImexRk2, g).unwrap();
        for form in [SmoothingRhs::Forcing, SmoothingRhs::WeightedForcing] {
            let r = smoothing_estimate_check(&p, std::slice::from_ref(&cfg), 0.5, form).unwrap();
            assert!(r.rhs > 0.0 && r.lhs > 0.0 && r.ratio.is_finite());
        }
    }
}
