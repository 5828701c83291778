//! Time integration of the ε-viscosity equations ∂_t u = −εΔ²u + L(x,t)u + f.

mod operator;
mod record;
mod run;
mod snapshot;
mod stepping;

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientModel;
use crate::error::{config, Result};
use crate::field::ComplexField;
use crate::grid::Grid;
use crate::hypotheses::{check_hypotheses, HypothesisOptions};

pub use operator::{
    apply_L, apply_L_linearized, apply_principal, apply_sampled, sample_coefficients, self_adjoint_residual,
    state_samples, SampledCoefficients, SpectralContext,
};
pub use record::{continuation_monitor, ContinuationVerdict, RecordRow, RunRecord, Termination};
pub use run::{flat_plane_wave_factor, solve_linear, solve_quasilinear, Observers};
pub use snapshot::{read_snapshot, write_snapshot, Snapshot, SNAPSHOT_HEADER_BYTES, SNAPSHOT_MAGIC};
pub use stepping::viscosity_semigroup;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Strang splitting: exact half viscosity steps around a Heun step on L u + f.
    ImexRk2,
    /// Second-order Lawson scheme with the viscosity semigroup as integrating factor.
    ExponentialLawson,
}

/// Weighted Sobolev norm ‖⟨x⟩^weight J^s u‖₂ tracked along a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackedNorm {
    pub s: f64,
    #[serde(default)]
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub grid: Grid,
    pub record_every: usize,
    /// Bound on dt·max|h₂| over the dealiased lattice.
    #[serde(default = "default_budget")]
    pub stability_budget: f64,
    #[serde(default)]
    pub tracked_norms: Vec<TrackedNorm>,
    /// Ñ in the smoothing weight ⟨x⟩^{−Ñ}.
    #[serde(default = "default_ntilde")]
    pub smoothing_weight: f64,
    /// s in the smoothing density ‖⟨x⟩^{−Ñ/2}J^s u‖₂².
    #[serde(default = "default_smoothing_order")]
    pub smoothing_order: f64,
    /// Keep the field every this many steps (and at the end) for later diagnostics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
    /// Record Re i⟨ℒu, u⟩ residuals at every recorded step.
    #[serde(default)]
    pub track_self_adjoint: bool,
    /// Radius of the admissible z⃗ ball for quasilinear runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
}

fn default_budget() -> f64 {
    0.25
}
fn default_ntilde() -> f64 {
    2.0
}
fn default_smoothing_order() -> f64 {
    0.5
}

impl SolverConfig {
    pub fn new(epsilon: f64, dt: f64, t_final: f64, scheme: Scheme, grid: Grid) -> Result<Self> {
        let c = Self {
            epsilon,
            dt,
            t_final,
            scheme,
            grid,
            record_every: 1,
            stability_budget: default_budget(),
            tracked_norms: Vec::new(),
            smoothing_weight: default_ntilde(),
            smoothing_order: default_smoothing_order(),
            snapshot_every: None,
            track_self_adjoint: false,
            r0: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validated()?;
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(config(format!("epsilon {} must lie in (0, 1]", self.epsilon)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(config("dt must be positive"));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(config("t_final must be nonnegative"));
        }
        if self.record_every == 0 || self.snapshot_every == Some(0) {
            return Err(config("record_every and snapshot_every must be positive"));
        }
        if !(self.stability_budget > 0.0) {
            return Err(config("stability_budget must be positive"));
        }
        if self.r0.is_some_and(|r| !(r > 0.0)) {
            return Err(config("r0 must be positive"));
        }
        Ok(())
    }

    /// Number of steps; the last step is shortened to land on t_final.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    /// Estimated max|h₂| = max_x σ_max(a(x)) · max kept |ξ|² for coefficients sampled at `u0`.
    pub fn h2_bound(&self, model: &CoefficientModel, u0: &ComplexField) -> Result<f64> {
        let ctx = SpectralContext::new(self.grid);
        let z = model.is_quasilinear().then(|| state_samples(&ctx, u0));
        let coeffs = sample_coefficients(model, &self.grid, 0.0, z.as_deref(), f64::INFINITY)?;
        let smax = coeffs.a.iter().map(|a| a.symmetric_eigen().0.iter().fold(0.0f64, |m, v| m.max(v.abs()))).fold(0.0, f64::max);
        Ok(smax * ctx.max_kept_xi2())
    }

    /// Fails when dt·max|h₂| exceeds the stability budget.
    pub fn check_stability(&self, model: &CoefficientModel, u0: &ComplexField) -> Result<()> {
        self.validate()?;
        let h2 = self.h2_bound(model, u0)?;
        if self.dt * h2 > self.stability_budget {
            return Err(config(format!(
                "dt = {} violates the stability budget: dt·max|h2| = {:.4} > {}",
                self.dt,
                self.dt * h2,
                self.stability_budget
            )));
        }
        Ok(())
    }
}

/// z⃗-independent model with its initial datum; forcing comes from the model.
#[derive(Clone, Debug)]
pub struct LinearProblem {
    pub model: CoefficientModel,
    pub u0: ComplexField,
}

impl LinearProblem {
    pub fn new(model: CoefficientModel, u0: ComplexField) -> Result<Self> {
        if model.is_quasilinear() {
            return Err(config("linear problems need a z-independent model"));
        }
        if model.dim() != u0.grid().dim() {
            return Err(config("model and initial datum dimensions differ"));
        }
        check_hypotheses(&model, 0.0, 1000, &HypothesisOptions::default())?;
        Ok(Self { model, u0 })
    }
}

/// Model with full z⃗ dependence and its initial datum.
#[derive(Clone, Debug)]
pub struct QuasilinearProblem {
    pub model: CoefficientModel,
    pub u0: ComplexField,
}

impl QuasilinearProblem {
    pub fn new(model: CoefficientModel, u0: ComplexField) -> Result<Self> {
        if model.dim() != u0.grid().dim() {
            return Err(config("model and initial datum dimensions differ"));
        }
        if spectral_tail(&u0) > 1e-8 {
            return Err(config("initial datum is not resolved: spectral tail above 1e-8"));
        }
        Ok(Self { model, u0 })
    }
}

/// Fraction of ‖u‖ carried by slots outside the 2/3 dealiasing band.
pub fn spectral_tail(u: &ComplexField) -> f64 {
    let norm = u.l2_norm();
    if norm == 0.0 {
        return 0.0;
    }
    let grid = *u.grid();
    let tail: f64 = u
        .spectrum()
        .iter()
        .enumerate()
        .filter(|(i, _)| !crate::field::dealias_keeps(&grid, *i))
        .map(|(_, c)| c.norm_sqr())
        .sum();
    tail.sqrt() / norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::ModelSpec;
    use crate::grid::Signature;

    #[test]
    fn config_validation() {
        let g = Grid::new(2, 10.0, 32).unwrap();
        assert!(SolverConfig::new(0.0, 0.01, 1.0, Scheme::ImexRk2, g).is_err());
        assert!(SolverConfig::new(1.5, 0.01, 1.0, Scheme::ImexRk2, g).is_err());
        assert!(SolverConfig::new(0.1, -0.01, 1.0, Scheme::ImexRk2, g).is_err());
        let c = SolverConfig::new(0.1, 0.3, 1.0, Scheme::ImexRk2, g).unwrap();
        assert_eq!(c.steps(), 4);
        let m = ModelSpec::flat(Signature::new(2, 1).unwrap()).build(10.0).unwrap();
        let u0 = ComplexField::zeros(g);
        assert!(c.check_stability(&m, &u0).is_err());
        let fine = SolverConfig { dt: 1e-3, ..c };
        fine.check_stability(&m, &u0).unwrap();
    }

    #[test]
    fn config_round_trips_through_json() {
        let g = Grid::new(2, 10.0, 32).unwrap();
        let mut c = SolverConfig::new(0.1, 0.01, 1.0, Scheme::ExponentialLawson, g).unwrap();
        c.tracked_norms.push(TrackedNorm { s: 1.0, weight: 2.0 });
        let s = serde_json::to_string(&c).unwrap();
        let back: SolverConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn quasilinear_problem_rejects_unresolved_data() {
        let g = Grid::new(2, 10.0, 16).unwrap();
        let m = ModelSpec::flat(Signature::new(2, 1).unwrap()).build(10.0).unwrap();
        let rough = ComplexField::plane_wave(g, &[7, 0]).unwrap();
        assert!(QuasilinearProblem::new(m.clone(), rough).is_err());
        let smooth = ComplexField::plane_wave(g, &[1, 0]).unwrap();
        assert!(QuasilinearProblem::new(m, smooth).is_ok());
    }
}
