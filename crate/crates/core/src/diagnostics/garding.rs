use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::EstimateReport;
use crate::coefficients::{CoefficientModel, StateSample};
use crate::error::{Error, Result};
use crate::grid::{japanese, norm, MAX_DIM};
use crate::rays::{xi_from_unit, EscapeFunction, GardingOptions};
use crate::sampling::Halton;

/// Worst sample of the commutator probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorSample {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    /// e^p H_{h₂}p.
    pub diagonal: f64,
    /// Largest eigenvalue of e^p · Herm(B(x, ξ)).
    pub first_order: f64,
}

/// Largest eigenvalue of the Hermitian part of B = i[[b₁·ξ, b₂·ξ], [b̄₂·ξ, b̄₁·ξ]], the first-order
/// symbol of the system for (u, ū).
fn first_order_top(b1: &[Complex64; MAX_DIM], b2: &[Complex64; MAX_DIM], xi: &[f64]) -> f64 {
    let i = Complex64::new(0.0, 1.0);
    let dot = |b: &[Complex64; MAX_DIM]| xi.iter().zip(b).map(|(x, c)| c * x).sum::<Complex64>();
    let dotc = |b: &[Complex64; MAX_DIM]| xi.iter().zip(b).map(|(x, c)| c.conj() * x).sum::<Complex64>();
    let b = Matrix2::new(i * dot(b1), i * dot(b2), i * dotc(b2), i * dotc(b1));
    let h = (b + b.adjoint()) * Complex64::new(0.5, 0.0);
    // Eigenvalues of a 2×2 Hermitian matrix in closed form.
    let (a, d, off) = (h[(0, 0)].re, h[(1, 1)].re, h[(0, 1)].norm());
    0.5 * (a + d) + (0.25 * (a - d) * (a - d) + off * off).sqrt()
}

/// Samples the symbol e^p(H_{h₂}p·I − Herm B) of the conjugated system at time t and reports its
/// smallest eigenvalue relative to |ξ|⟨x⟩^{−Ñ}. Bounded when the diagonal dominates at every sample.
pub fn garding_commutator_probe(
    model: &CoefficientModel,
    p: &EscapeFunction,
    t: f64,
    sample_budget: usize,
    opts: &GardingOptions,
) -> Result<(EstimateReport, CommutatorSample)> {
    if sample_budget == 0 {
        return Err(Error::Precondition("sample_budget must be positive".into()));
    }
    if p.signature != model.signature() {
        return Err(Error::Precondition("escape function and model signatures differ".into()));
    }
    let n = model.dim();
    let udim = if n == 1 { 2 } else { n };
    let mut seq = Halton::new(n + udim, opts.seed);
    let mut u = vec![0.0; n + udim];
    let mut x = [0.0; MAX_DIM];
    let mut xi = [0.0; MAX_DIM];
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut min_rel = f64::INFINITY;
    let mut worst = CommutatorSample { x: vec![], xi: vec![], diagonal: 0.0, first_order: 0.0 };
    for _ in 0..sample_budget {
        seq.next_point(&mut u);
        for d in 0..n {
            x[d] = opts.x_half * (2.0 * u[d] - 1.0);
        }
        xi_from_unit(&u[n..], n, opts.xi_max, &mut xi);
        let (xs, xis) = (&x[..n], &xi[..n]);
        let z = StateSample::ZERO;
        let a = model.a(xs, t, &z);
        let da = model.a_gradient(xs, t, &z);
        let ep = p.eval(xs, xis).exp();
        let diagonal = ep * p.poisson_bracket(&a, &da, xs, xis);
        let first_order = ep * first_order_top(&model.b1(xs, t, &z), &model.b2(xs, t, &z), xis);
        let scale = norm(xis) * japanese(xs).powf(-p.ntilde);
        min_rel = min_rel.min((diagonal - first_order) / scale);
        let ratio = if diagonal > 0.0 { first_order / diagonal } else { f64::INFINITY };
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst = CommutatorSample { x: xs.to_vec(), xi: xis.to_vec(), diagonal, first_order };
        }
    }
    let mut report = EstimateReport::new("garding_commutator", worst.first_order.max(0.0), worst.diagonal, min_rel > 0.0)
        .with("min_eigenvalue_relative", min_rel)
        .with("t", t)
        .with("ntilde", p.ntilde)
        .with("samples", sample_budget as f64);
    report.ratio = worst_ratio;
    if !report.verdict.is_bounded() {
        report.verdict = super::Verdict::Violated { ratio: worst_ratio };
    }
    Ok((report, worst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{ModelSpec, VectorSpec};
    use crate::grid::Signature;
    use crate::rays::escape_function_flat;

    fn sig() -> Signature {
        Signature::new(2, 1).unwrap()
    }

    fn opts() -> GardingOptions {
        GardingOptions { seed: 3, x_half: 20.0, xi_max: 20.0 }
    }

    #[test]
    fn hermitian_part_closed_form() {
        // b₁ = iβe₁ gives B₁₁ = −βξ₁ (real) and B₂₂ = βξ₁.
        let mut b1 = [Complex64::new(0.0, 0.0); MAX_DIM];
        b1[0] = Complex64::new(0.0, 0.7);
        let zero = [Complex64::new(0.0, 0.0); MAX_DIM];
        assert!((first_order_top(&b1, &zero, &[2.0, 0.0]) - 1.4).abs() < 1e-14);
        // Real b₁ makes B skew-Hermitian.
        let real = [Complex64::new(0.3, 0.0), Complex64::new(-0.2, 0.0), Complex64::new(0.0, 0.0)];
        assert!(first_order_top(&real, &zero, &[1.0, 2.0]).abs() < 1e-14);
    }

    #[test]
    fn flat_model_without_b_is_positive() {
        let m = ModelSpec::flat(sig()).build(20.0).unwrap();
        let p = escape_function_flat(sig(), 2.0).unwrap();
        let (r, _) = garding_commutator_probe(&m, &p, 0.0, 5000, &opts()).unwrap();
        assert!(r.verdict.is_bounded());
        // H_{h₂}p = 2|ξ|⟨r⟩^{−Ñ} with |r| ≤ |x|, and e^p ≥ e^{−π/2}.
        assert!(r.parameters["min_eigenvalue_relative"] >= 2.0 * (-std::f64::consts::FRAC_PI_2).exp() - 1e-12);
    }

    #[test]
    fn small_b_is_bounded_and_large_b_violated() {
        let p = escape_function_flat(sig(), 2.0).unwrap();
        let b = VectorSpec::gaussian(1.5, vec![0.0, 0.0], vec![0.02, 0.01]);
        let small = ModelSpec::flat(sig()).with_b1(b.clone()).build(20.0).unwrap();
        let (r, _) = garding_commutator_probe(&small, &p, 0.0, 10_000, &opts()).unwrap();
        assert!(r.verdict.is_bounded(), "{r:?}");
        let large = ModelSpec::flat(sig()).with_b1(b.scaled(100.0)).build(20.0).unwrap();
        let (r, w) = garding_commutator_probe(&large, &p, 0.0, 10_000, &opts()).unwrap();
        assert!(!r.verdict.is_bounded());
        assert!(w.first_order > w.diagonal);
    }
}
