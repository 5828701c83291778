//! Numerical machinery for quasilinear Schrödinger equations whose principal part is
//! non-degenerate but possibly indefinite.
//!
//! The crate is organized bottom-up: [`grid`] and [`field`] discretize a periodic box,
//! [`coefficients`] supplies closed-form coefficient models, [`rays`] integrates the
//! bicharacteristic flow, [`symbols`] quantizes phase-space symbols, [`solver`] advances the
//! viscosity-regularized equations, and [`diagnostics`] measures the energy and smoothing
//! inequalities on the resulting runs.

pub mod coefficients;
pub mod cutoff;
pub mod diagnostics;
pub mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod hypotheses;
pub mod linalg;
pub mod rays;
pub mod sampling;
pub mod solver;
pub mod symbols;

pub use coefficients::{CoefficientModel, ModelSpec, PrincipalSpec, ScalarSpec, StateSample, VectorSpec};
pub use error::{Error, Result};
pub use field::{bessel_apply, spectral_transform, weighted_norm, ComplexField, Direction};
pub use grid::{Grid, Signature};
pub use linalg::SmallMatrix;
pub use diagnostics::{EstimateReport, Verdict};
pub use hypotheses::{check_hypotheses, proportionality_check, HypothesisReport, Proportionality};
pub use rays::{classify_trapping, escape_function_flat, garding_margin, ichinose_functional, integrate_ray, PhasePoint, Trapping};
pub use solver::{LinearProblem, QuasilinearProblem, RunRecord, Scheme, SolverConfig, Termination};
pub use symbols::{ApplyMode, ErOperator, IntegratingFactor, QuantizationPlan, RaySymbol, RayTable, Symbol, SymbolClass};
