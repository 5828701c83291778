use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{project_into, Symbol};
use crate::error::{Error, Result};
use crate::grid::{japanese, Signature, MAX_DIM};
use crate::rays::xi_from_unit;
use crate::sampling::Halton;

/// Weight exponent μ and derivative multi-indices for one semi-norm. Symbols here do not depend on
/// the state variable s, so any α ≠ 0 yields zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeminormBudget {
    pub mu: f64,
    pub alpha: usize,
    pub beta: [usize; MAX_DIM],
    pub gamma: [usize; MAX_DIM],
}

/// Nested central differences ∂_x^β ∂_ξ^γ f with a common step.
pub(crate) fn nested_difference(
    f: &dyn Fn(&[f64], &[f64]) -> Complex64,
    x: &[f64],
    xi: &[f64],
    beta: &[usize; MAX_DIM],
    gamma: &[usize; MAX_DIM],
    step: f64,
) -> Complex64 {
    let n = x.len();
    let shifted = |on_x: bool, d: usize, sign: f64, b: &[usize; MAX_DIM], g: &[usize; MAX_DIM]| {
        let mut xs = [0.0; MAX_DIM];
        let mut es = [0.0; MAX_DIM];
        xs[..n].copy_from_slice(x);
        es[..n].copy_from_slice(xi);
        if on_x {
            xs[d] += sign * step;
        } else {
            es[d] += sign * step;
        }
        nested_difference(f, &xs[..n], &es[..n], b, g, step)
    };
    if let Some(d) = (0..n).find(|&d| beta[d] > 0) {
        let mut b = *beta;
        b[d] -= 1;
        return (shifted(true, d, 1.0, &b, gamma) - shifted(true, d, -1.0, &b, gamma)) / (2.0 * step);
    }
    if let Some(d) = (0..n).find(|&d| gamma[d] > 0) {
        let mut g = *gamma;
        g[d] -= 1;
        return (shifted(false, d, 1.0, beta, &g) - shifted(false, d, -1.0, beta, &g)) / (2.0 * step);
    }
    f(x, xi)
}

/// Sampled semi-norm max |⟨P(x, A_hξ)⟩^μ ∂_x^β ∂_ξ^γ a| / ⟨ξ⟩^{m−|γ|} over Halton points with
/// |x_j| ≤ `x_half` and 1 ≤ |ξ| ≤ `xi_max`.
pub fn seminorm_estimate(
    sym: &dyn Symbol,
    signature: Signature,
    budget: &SeminormBudget,
    sample_budget: usize,
    x_half: f64,
    xi_max: f64,
) -> Result<f64> {
    let n = signature.dim();
    if budget.alpha > 3 || budget.beta.iter().chain(&budget.gamma).any(|&b| b > 3) {
        return Err(Error::Precondition("difference depth is limited to 3 per index".into()));
    }
    if budget.alpha > 0 {
        return Ok(0.0);
    }
    let order_gamma: usize = budget.gamma[..n].iter().sum();
    let udim = if n == 1 { 2 } else { n };
    let mut seq = Halton::new(n + udim, 11);
    let mut u = vec![0.0; n + udim];
    let mut x = [0.0; MAX_DIM];
    let mut xi = [0.0; MAX_DIM];
    let mut best = 0.0f64;
    let eval = |p: &[f64], q: &[f64]| sym.eval(p, q);
    for _ in 0..sample_budget {
        seq.next_point(&mut u);
        for d in 0..n {
            x[d] = x_half * (2.0 * u[d] - 1.0);
        }
        xi_from_unit(&u[n..], n, xi_max, &mut xi);
        let deriv = nested_difference(&eval, &x[..n], &xi[..n], &budget.beta, &budget.gamma, 1e-2);
        let mut axi = [0.0; MAX_DIM];
        signature.apply(&xi, &mut axi);
        let mut z = [0.0; MAX_DIM];
        project_into(&x[..n], &axi[..n], &mut z[..n]);
        let weight = japanese(&z[..n]).powf(budget.mu);
        let ratio = weight * deriv.norm() / japanese(&xi[..n]).powf(sym.order() - order_gamma as f64);
        best = best.max(ratio);
    }
    Ok(best)
}
