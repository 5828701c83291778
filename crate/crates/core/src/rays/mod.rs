//! Bicharacteristic rays: integration, trapping classification, the Ichinose functional and
//! escape functions.

mod escape;
mod flow;
mod ichinose;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::grid::{norm, MAX_DIM};

pub use escape::{escape_function_flat, garding_margin, garding_threshold, EscapeFamily, EscapeFunction, GardingMargin, GardingOptions};
pub use flow::{vector_field, Advance, DerivativeMode, Flow, FlowOptions, FrozenMetric, Integrand, Metric, RayState};
pub use ichinose::{ichinose_functional, IchinoseReport};
pub(crate) use escape::xi_from_unit;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        if x.len() != xi.len() || x.is_empty() || x.len() > MAX_DIM {
            return Err(Error::Domain("x and xi must have equal dimension in 1..=3".into()));
        }
        if !(norm(&xi) > 0.0) {
            return Err(Error::Domain("xi must be non-zero".into()));
        }
        Ok(Self { x, xi })
    }
}

/// Right-hand side of the bicharacteristic system for a model frozen at time t.
pub fn hamiltonian_field(model: &CoefficientModel, t: f64, point: &PhasePoint) -> (Vec<f64>, Vec<f64>) {
    let n = model.dim();
    let mut dx = vec![0.0; n];
    let mut dxi = vec![0.0; n];
    vector_field(&FrozenMetric::new(model, t), &point.x, &point.xi, &mut dx, &mut dxi);
    (dx, dxi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaySample {
    pub s: f64,
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    /// Relative deviation of h from its initial value.
    pub h_drift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RayTermination {
    Escape { s_exit: f64 },
    TimeBudget,
    StepFailure { s: f64, reason: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RayTrajectory {
    pub samples: Vec<RaySample>,
    pub h_initial: f64,
    pub h_drift_max: f64,
    pub terminated_by: RayTermination,
}

impl RayTrajectory {
    pub fn end(&self) -> &RaySample {
        self.samples.last().expect("trajectory holds the start sample")
    }

    /// CSV with columns s, X₁..X_n, Ξ₁..Ξ_n, h_drift.
    pub fn to_csv(&self) -> String {
        let n = self.samples.first().map_or(0, |s| s.x.len());
        let mut out = String::from("s");
        for j in 1..=n {
            out.push_str(&format!(",X{j}"));
        }
        for j in 1..=n {
            out.push_str(&format!(",Xi{j}"));
        }
        out.push_str(",h_drift\n");
        for smp in &self.samples {
            out.push_str(&format!("{:.17e}", smp.s));
            for v in smp.x.iter().chain(&smp.xi) {
                out.push_str(&format!(",{v:.17e}"));
            }
            out.push_str(&format!(",{:.6e}\n", smp.h_drift));
        }
        out
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if (1e-12..=1e-6).contains(&tol) {
        Ok(())
    } else {
        Err(Error::Precondition(format!("ray tolerance {tol} outside [1e-12, 1e-6]")))
    }
}

/// Integrates a ray of any metric from `start` to parameter `s_max` (negative for backward flow),
/// stopping early once |X| > `rho_escape`.
pub fn integrate_metric_ray<M: Metric + ?Sized>(
    metric: &M,
    start: &PhasePoint,
    s_max: f64,
    rho_escape: f64,
    opts: FlowOptions,
) -> Result<RayTrajectory> {
    check_tol(opts.tol)?;
    let n = metric.dim();
    if start.x.len() != n {
        return Err(Error::Domain(format!("phase point has dimension {}, metric has {n}", start.x.len())));
    }
    let flow = Flow::new(metric, None, opts);
    let mut st = flow.start(&start.x, &start.xi);
    let h0 = flow.hamiltonian(&st);
    let denom = h0.abs().max(1.0);
    let mut samples = vec![RaySample { s: 0.0, x: start.x.clone(), xi: start.xi.clone(), h_drift: 0.0 }];
    let mut drift_max = 0.0f64;
    let outcome = flow.advance(
        &mut st,
        s_max,
        &mut |s| norm(s.x(n)) > rho_escape,
        &mut |s| {
            let d = (flow.hamiltonian(s) - h0).abs() / denom;
            drift_max = drift_max.max(d);
            samples.push(RaySample { s: s.s, x: s.x(n).to_vec(), xi: s.xi(n).to_vec(), h_drift: d });
        },
    );
    let terminated_by = match outcome {
        Advance::Reached => RayTermination::TimeBudget,
        Advance::Stopped => RayTermination::Escape { s_exit: st.s },
        Advance::StepFailure(reason) => RayTermination::StepFailure { s: st.s, reason },
    };
    Ok(RayTrajectory { samples, h_initial: h0, h_drift_max: drift_max, terminated_by })
}

/// Integrates the bicharacteristic flow of `model` frozen at t = 0.
pub fn integrate_ray(
    model: &CoefficientModel,
    start: &PhasePoint,
    s_max: f64,
    rho_escape: f64,
    tol: f64,
) -> Result<RayTrajectory> {
    integrate_metric_ray(&FrozenMetric::new(model, 0.0), start, s_max, rho_escape, FlowOptions { tol, ..Default::default() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Trapping {
    Escaped { s_exit: f64 },
    /// The ray neither escaped nor failed within the budget; non-escape cannot be certified.
    Undecided,
    /// Integration failed before a decision.
    Failed { reason: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrappingVerdict {
    pub seed: PhasePoint,
    #[serde(flatten)]
    pub verdict: Trapping,
    pub rho_escape: f64,
    pub s_max: f64,
    pub h_drift_max: f64,
}

/// Classifies seeds as escaped or undecided at the budget (s_max, rho_escape).
pub fn classify_trapping<M: Metric + ?Sized>(
    metric: &M,
    seeds: &[PhasePoint],
    s_max: f64,
    rho_escape: f64,
    tol: f64,
) -> Result<Vec<TrappingVerdict>> {
    if rho_escape < metric.flat_radius() {
        return Err(Error::Precondition(format!(
            "escape radius {rho_escape} is inside the flat radius {}",
            metric.flat_radius()
        )));
    }
    check_tol(tol)?;
    seeds
        .par_iter()
        .map(|seed| {
            let opts = FlowOptions { tol, max_displacement: 1.0, ..Default::default() };
            let traj = integrate_metric_ray(metric, seed, s_max, rho_escape, opts)?;
            let verdict = match &traj.terminated_by {
                RayTermination::Escape { s_exit } => Trapping::Escaped { s_exit: *s_exit },
                RayTermination::TimeBudget => Trapping::Undecided,
                RayTermination::StepFailure { reason, .. } => Trapping::Failed { reason: reason.clone() },
            };
            Ok(TrappingVerdict { seed: seed.clone(), verdict, rho_escape, s_max, h_drift_max: traj.h_drift_max })
        })
        .collect()
}
