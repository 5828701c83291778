use num_complex::Complex64;

use super::operator::{apply_sampled, sample_coefficients, self_adjoint_residual, state_samples, SampledCoefficients, SpectralContext};
use super::record::{RecordRow, RunRecord, Termination};
use super::snapshot::Snapshot;
use super::stepping::step;
use super::{LinearProblem, QuasilinearProblem, SolverConfig};
use crate::coefficients::{CoefficientModel, StateSample};
use crate::error::{config, Error, Result};
use crate::field::{weighted_norm, ComplexField};
use crate::grid::MAX_DIM;
use crate::symbols::ErOperator;

/// Optional operators evaluated on every recorded state.
#[derive(Clone, Copy, Default)]
pub struct Observers<'a> {
    /// Supplies ‖(K^R)^*u‖₂ and ‖E^R u‖₂.
    pub er: Option<&'a ErOperator>,
}

/// Advances the linear problem; configuration problems are errors, numerical breakdown ends the
/// run with a termination reason.
pub fn solve_linear(problem: &LinearProblem, config: &SolverConfig, observers: Observers) -> Result<RunRecord> {
    run(&problem.model, &problem.u0, config, observers)
}

/// Advances the quasilinear problem with coefficients frozen at the start-of-step state.
pub fn solve_quasilinear(problem: &QuasilinearProblem, config: &SolverConfig, observers: Observers) -> Result<RunRecord> {
    run(&problem.model, &problem.u0, config, observers)
}

const BLOWUP_FACTOR: f64 = 1e6;

struct Stepper<'a> {
    model: &'a CoefficientModel,
    ctx: SpectralContext,
    fixed: Option<SampledCoefficients>,
    r0: f64,
}

impl Stepper<'_> {
    fn coefficients(&self, t: f64, z: Option<&[StateSample]>) -> Result<SampledCoefficients> {
        match &self.fixed {
            Some(c) => Ok(c.clone()),
            None => sample_coefficients(self.model, self.ctx.grid(), t, z, self.r0),
        }
    }

    fn forcing(&self, t: f64) -> Option<ComplexField> {
        self.model.has_forcing().then(|| ComplexField::from_fn(*self.ctx.grid(), |x| self.model.forcing(x, t)))
    }

    fn rhs(&self, coeffs: &SampledCoefficients, t: f64, u: &ComplexField) -> ComplexField {
        let lu = apply_sampled(&self.ctx, coeffs, u);
        match self.forcing(t) {
            Some(f) => lu.add(&f),
            None => lu,
        }
    }
}

fn run(model: &CoefficientModel, u0: &ComplexField, cfg: &SolverConfig, observers: Observers) -> Result<RunRecord> {
    if !u0.grid().same_as(&cfg.grid) {
        return Err(config("initial datum is not on the configured grid"));
    }
    if model.dim() != cfg.grid.dim() {
        return Err(config("model and grid dimensions differ"));
    }
    cfg.check_stability(model, u0)?;
    let quasi = model.is_quasilinear();
    let ctx = SpectralContext::new(cfg.grid);
    let fixed = if !quasi && !model.is_time_dependent() {
        Some(sample_coefficients(model, &cfg.grid, 0.0, None, f64::INFINITY)?)
    } else {
        None
    };
    let stepper = Stepper { model, ctx, fixed, r0: cfg.r0.unwrap_or(f64::INFINITY) };
    let n0 = u0.l2_norm();
    let threshold = BLOWUP_FACTOR * if n0 > 0.0 { n0 } else { 1.0 };

    let mut record = RunRecord {
        model: model.spec().clone(),
        config: cfg.clone(),
        rows: Vec::new(),
        termination: Termination::Completed,
        snapshots: Vec::new(),
    };
    let mut u = u0.clone();
    let mut t = 0.0;
    push_row(&mut record, &stepper, &u, t, observers)?;
    if cfg.snapshot_every.is_some() {
        record.snapshots.push(Snapshot { t, field: u.clone() });
    }
    let steps = cfg.steps();
    for k in 0..steps {
        let dt = cfg.dt.min(cfg.t_final - t);
        let z = if quasi { Some(state_samples(&stepper.ctx, &u)) } else { None };
        let frozen = match stepper.coefficients(t, z.as_deref()) {
            Ok(c) => c,
            Err(Error::Range { max_z, r0 }) => {
                record.termination = Termination::RangeExit { t, max_z, r0 };
                break;
            }
            Err(e) => return Err(e),
        };
        let time_dependent = model.is_time_dependent();
        let mut rhs = |ts: f64, v: &ComplexField| -> Result<ComplexField> {
            if time_dependent && ts != t {
                let c = stepper.coefficients(ts, z.as_deref())?;
                Ok(stepper.rhs(&c, ts, v))
            } else {
                Ok(stepper.rhs(&frozen, ts, v))
            }
        };
        let next = match step(cfg.scheme, cfg.epsilon, t, dt, &u, &mut rhs) {
            Ok(v) => v,
            Err(Error::Range { max_z, r0 }) => {
                record.termination = Termination::RangeExit { t, max_z, r0 };
                break;
            }
            Err(e) => return Err(e),
        };
        let t_next = if k + 1 == steps { cfg.t_final } else { t + dt };
        if !next.is_finite() {
            record.termination = Termination::StepFailure { t: t_next, reason: "non-finite values in the state".into() };
            break;
        }
        u = next;
        t = t_next;
        let blowup = u.l2_norm() > threshold;
        let last = k + 1 == steps;
        if blowup || last || (k + 1) % cfg.record_every == 0 {
            push_row(&mut record, &stepper, &u, t, observers)?;
        }
        if let Some(every) = cfg.snapshot_every {
            if (k + 1) % every == 0 || last || blowup {
                record.snapshots.push(Snapshot { t, field: u.clone() });
            }
        }
        if blowup {
            record.termination = Termination::NormBlowup { t };
            break;
        }
    }
    if !record.termination.is_completed() && cfg.snapshot_every.is_some() {
        if record.snapshots.last().is_none_or(|s| s.t != t) {
            record.snapshots.push(Snapshot { t, field: u.clone() });
        }
    }
    Ok(record)
}

fn push_row(record: &mut RunRecord, stepper: &Stepper, u: &ComplexField, t: f64, observers: Observers) -> Result<()> {
    let cfg = &record.config;
    let density = weighted_norm(u, cfg.smoothing_order, -cfg.smoothing_weight / 2.0).powi(2);
    let increment = record.rows.last().map_or(0.0, |p| 0.5 * (p.smoothing_density + density) * (t - p.t));
    let quasi = stepper.model.is_quasilinear();
    let z = quasi.then(|| state_samples(&stepper.ctx, u));
    let max_z = z.as_ref().map(|z| z.iter().map(|s| s.magnitude()).fold(0.0, f64::max));
    let residual = if cfg.track_self_adjoint {
        let coeffs = match &stepper.fixed {
            Some(c) => c.clone(),
            None => sample_coefficients(stepper.model, stepper.ctx.grid(), t, z.as_deref(), f64::INFINITY)?,
        };
        Some(self_adjoint_residual(&stepper.ctx, &coeffs, u))
    } else {
        None
    };
    let (kstar, e_r) = match observers.er {
        Some(er) => (Some(er.k_adjoint(u)?.l2_norm()), Some(er.apply(u)?.l2_norm())),
        None => (None, None),
    };
    let row = RecordRow {
        t,
        l2: u.l2_norm(),
        tracked: cfg.tracked_norms.iter().map(|n| weighted_norm(u, n.s, n.weight)).collect(),
        smoothing_density: density,
        smoothing_increment: increment,
        laplacian: u.laplacian().l2_norm(),
        kstar,
        e_r,
        self_adjoint_residual: residual,
        max_z,
    };
    record.rows.push(row);
    Ok(())
}

/// Closed-form flat-model plane wave: e^{(i h₂(ξ) − ε|ξ|⁴)t} e^{iξ·x} for L e^{iξx} = i h₂(ξ) e^{iξx}.
pub fn flat_plane_wave_factor(h2: f64, xi: &[f64; MAX_DIM], epsilon: f64, t: f64) -> Complex64 {
    let k2: f64 = xi.iter().map(|c| c * c).sum();
    Complex64::new(-epsilon * k2 * k2 * t, h2 * t).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{ModelSpec, PrincipalSpec, VectorSpec};
    use crate::grid::{Grid, Signature};
    use crate::solver::Scheme;

    fn sig() -> Signature {
        Signature::new(2, 1).unwrap()
    }

    fn gaussian(grid: Grid, amp: f64, width: f64) -> ComplexField {
        ComplexField::from_fn(grid, |x| Complex64::new(amp * (-(x[0] * x[0] + x[1] * x[1]) / (width * width)).exp(), 0.0))
    }

    #[test]
    fn flat_plane_wave_matches_closed_form() {
        let grid = Grid::new(2, 10.0, 32).unwrap();
        let model = ModelSpec::flat(sig()).build(10.0).unwrap();
        let k = [2i64, -1];
        let u0 = ComplexField::plane_wave(grid, &k).unwrap();
        let mut xi = [0.0; MAX_DIM];
        grid.frequency(grid.slot_of_wavenumbers(&k).unwrap(), &mut xi);
        let h2 = sig().quadratic(&xi[..2]);
        for scheme in [Scheme::ImexRk2, Scheme::ExponentialLawson] {
            let cfg = SolverConfig {
                record_every: 1000,
                snapshot_every: Some(1000),
                ..SolverConfig::new(1e-2, 1e-3, 1.0, scheme, grid).unwrap()
            };
            let p = LinearProblem::new(model.clone(), u0.clone()).unwrap();
            let rec = solve_linear(&p, &cfg, Observers::default()).unwrap();
            assert!(rec.termination.is_completed());
            let expected = u0.scale(flat_plane_wave_factor(h2, &xi, 1e-2, 1.0));
            let last = rec.snapshots.last().unwrap();
            assert!((last.t - 1.0).abs() < 1e-12);
            let err = last.field.sub(&expected).max_abs();
            assert!(err < 1e-8, "{scheme:?}: {err}");
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let grid = Grid::new(2, 10.0, 16).unwrap();
        let cfg = SolverConfig::new(1e-2, 1e-2, 0.1, Scheme::ImexRk2, grid).unwrap();
        let lin = LinearProblem::new(ModelSpec::flat(sig()).build(10.0).unwrap(), ComplexField::zeros(grid)).unwrap();
        let rec = solve_linear(&lin, &cfg, Observers::default()).unwrap();
        assert!(rec.rows.iter().all(|r| r.l2 == 0.0));
        let qm = ModelSpec::new(sig(), PrincipalSpec::QuasilinearCubic { alpha: 0.1, beta: [0.1, 0.0], gamma: [0.0, 0.1] })
            .build(10.0)
            .unwrap();
        let q = QuasilinearProblem::new(qm, ComplexField::zeros(grid)).unwrap();
        let rec = solve_quasilinear(&q, &cfg, Observers::default()).unwrap();
        assert!(rec.rows.iter().all(|r| r.l2 == 0.0));
    }

    #[test]
    fn dissipative_without_lower_order_terms() {
        let grid = Grid::new(2, 8.0, 32).unwrap();
        let model = ModelSpec::new(sig(), PrincipalSpec::GaussianBump { amplitude: 0.3, width: 1.5, time_drift: 0.0 })
            .build(8.0)
            .unwrap();
        let cfg = SolverConfig { track_self_adjoint: true, ..SolverConfig::new(1e-2, 2e-3, 0.2, Scheme::ImexRk2, grid).unwrap() };
        let rec = solve_linear(&LinearProblem::new(model, gaussian(grid, 1.0, 1.5)).unwrap(), &cfg, Observers::default()).unwrap();
        for w in rec.rows.windows(2) {
            assert!(w[1].l2 <= w[0].l2 * (1.0 + 1e-9), "{} -> {}", w[0].l2, w[1].l2);
        }
        assert!(rec.rows.iter().all(|r| r.self_adjoint_residual.unwrap() < 1e-10));
    }

    #[test]
    fn runs_are_deterministic() {
        let grid = Grid::new(2, 8.0, 16).unwrap();
        let model = ModelSpec::flat(sig()).with_b1(VectorSpec::gaussian(1.0, vec![0.1, 0.0], vec![0.0, 0.1])).build(8.0).unwrap();
        let cfg = SolverConfig::new(1e-2, 1e-2, 0.2, Scheme::ExponentialLawson, grid).unwrap();
        let p = LinearProblem::new(model, gaussian(grid, 1.0, 1.0)).unwrap();
        let a = solve_linear(&p, &cfg, Observers::default()).unwrap();
        let b = solve_linear(&p, &cfg, Observers::default()).unwrap();
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn unstable_dt_is_rejected() {
        let grid = Grid::new(2, 8.0, 32).unwrap();
        let cfg = SolverConfig::new(1e-2, 0.5, 1.0, Scheme::ImexRk2, grid).unwrap();
        let p = LinearProblem::new(ModelSpec::flat(sig()).build(8.0).unwrap(), gaussian(grid, 1.0, 1.0)).unwrap();
        assert!(matches!(solve_linear(&p, &cfg, Observers::default()), Err(Error::Config(_))));
    }

    #[test]
    fn large_quasilinear_data_leave_the_ball() {
        let grid = Grid::new(2, 12.0, 64).unwrap();
        let qm = ModelSpec::new(sig(), PrincipalSpec::QuasilinearCubic { alpha: 0.05, beta: [0.0, 0.0], gamma: [0.5, 0.0] })
            .build(12.0)
            .unwrap();
        let u0 = gaussian(grid, 1.0, 2.5);
        let z0 = state_samples(&SpectralContext::new(grid), &u0).iter().map(|s| s.magnitude()).fold(0.0, f64::max);
        // c₁ = γ|u|² with real γ > 0 grows the solution until |z⃗| crosses r₀.
        let cfg = SolverConfig { r0: Some(1.2 * z0), ..SolverConfig::new(1e-2, 2e-3, 2.0, Scheme::ImexRk2, grid).unwrap() };
        let rec = solve_quasilinear(&QuasilinearProblem::new(qm, u0).unwrap(), &cfg, Observers::default()).unwrap();
        match rec.termination {
            Termination::RangeExit { t, max_z, r0 } => {
                assert!(t > 0.0 && max_z > r0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn snapshots_follow_the_schedule() {
        let grid = Grid::new(2, 8.0, 16).unwrap();
        let cfg = SolverConfig { snapshot_every: Some(5), ..SolverConfig::new(1e-2, 1e-2, 0.2, Scheme::ImexRk2, grid).unwrap() };
        let p = LinearProblem::new(ModelSpec::flat(sig()).build(8.0).unwrap(), gaussian(grid, 1.0, 1.0)).unwrap();
        let rec = solve_linear(&p, &cfg, Observers::default()).unwrap();
        let ts: Vec<f64> = rec.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(ts.len(), 5);
        assert!((ts[4] - 0.2).abs() < 1e-12);
        assert_eq!(rec.rows.len(), 21);
    }
}
