//! Shared fixtures for the benchmarks.

use num_complex::Complex64;
use uhs_core::{CoefficientModel, ComplexField, Grid, ModelSpec, PhasePoint, PrincipalSpec, Signature, VectorSpec};

pub const HALF_WIDTH: f64 = 10.0;

pub fn grid(points: usize) -> Grid {
    Grid::new(2, HALF_WIDTH, points).expect("power-of-two grid")
}

/// Modulated Gaussian, smooth and well inside the box.
pub fn wave_packet(grid: Grid) -> ComplexField {
    ComplexField::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        Complex64::from_polar((-r2 / 4.0).exp(), 1.5 * x[0])
    })
}

/// Hyperbolic bump with a small complex drift.
pub fn bump_model() -> CoefficientModel {
    let sig = Signature::new(2, 1).expect("valid signature");
    ModelSpec::new(sig, PrincipalSpec::GaussianBump { amplitude: 0.1, width: 2.0, time_drift: 0.0 })
        .with_b1(VectorSpec::gaussian(1.5, vec![0.05, 0.0], vec![0.02, 0.01]))
        .build(HALF_WIDTH)
        .expect("valid model")
}

pub fn seed() -> PhasePoint {
    PhasePoint::new(vec![-2.0, 0.5], vec![1.0, 0.3]).expect("two-dimensional seed")
}
