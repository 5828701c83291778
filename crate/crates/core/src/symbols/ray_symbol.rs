use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::truncation::TruncatedOperator;
use super::{Symbol, SymbolClass};
use crate::coefficients::StateSample;
use crate::cutoff::cutoff_chi;
use crate::error::{Error, Result};
use crate::grid::{norm, MAX_DIM};
use crate::rays::{Advance, Flow, FlowOptions, Metric};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum B1Variant {
    /// σ = −i b₁(x, 0)·ξ.
    OrderZero,
    /// σ = s(Σ_{jk} ∂_j a^R_{jk} ξ_j ξ_k)(Σ_l ξ_l)⟨ξ⟩^{−2} − i b₁(x, 0)·ξ.
    SDerivative { s: i32 },
}

impl B1Variant {
    pub fn label(&self) -> String {
        match self {
            B1Variant::OrderZero => "order_zero".into(),
            B1Variant::SDerivative { s } => format!("s_derivative_{s}"),
        }
    }

    /// Whether the ray integral depends on |ξ| beyond the χ(|ξ|) factor.
    pub fn is_radial(&self) -> bool {
        matches!(self, B1Variant::SDerivative { s } if *s != 0)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RaySymbolOptions {
    pub tol: f64,
    /// Initial tail radius as a multiple of R.
    pub tail_factor: f64,
    /// Largest parameter span of one backward ray.
    pub s_budget: f64,
}

impl Default for RaySymbolOptions {
    fn default() -> Self {
        Self { tol: 1e-10, tail_factor: 4.0, s_budget: 1e6 }
    }
}

/// p^R(x, ξ) = −χ(|ξ|)∫_{−∞}^0 σ(X^R(s; x, ξ), Ξ^R(s; x, ξ)) ds along the truncated flow,
/// evaluated directly by backward ray integration.
pub struct RaySymbol {
    op: TruncatedOperator,
    variant: B1Variant,
    opts: RaySymbolOptions,
}

impl RaySymbol {
    pub fn new(op: TruncatedOperator, variant: B1Variant, opts: RaySymbolOptions) -> Self {
        Self { op, variant, opts }
    }

    pub fn operator(&self) -> &TruncatedOperator {
        &self.op
    }

    pub fn variant(&self) -> B1Variant {
        self.variant
    }

    pub fn options(&self) -> RaySymbolOptions {
        self.opts
    }

    /// True when σ vanishes identically, so p^R ≡ 0 without integrating.
    pub fn is_trivial(&self) -> bool {
        let no_b1 = self.op.model().b1_is_zero();
        match self.variant {
            B1Variant::OrderZero => no_b1,
            B1Variant::SDerivative { s } => no_b1 && (s == 0 || !self.op.model().has_principal_perturbation()),
        }
    }

    pub fn try_eval(&self, x: &[f64], xi: &[f64]) -> Result<Complex64> {
        let n = self.op.dim();
        let r = norm(&xi[..n]);
        let chi = cutoff_chi(r);
        if chi == 0.0 || self.is_trivial() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let mut omega = [0.0; MAX_DIM];
        for d in 0..n {
            omega[d] = xi[d] / r;
        }
        Ok(-chi * self.unit_integral(x, &omega[..n], 1.0 / r)?)
    }

    /// ∫_{−∞}^0 σ ds for the ray started at (x, ω/v) with |ω| = 1, computed on the ray of (x, ω).
    /// Rays of h = ⟨aξ, ξ⟩ rescale as X(s; x, λω) = X(λs; x, ω), Ξ = λΞ(λs; x, ω), so only the
    /// ⟨ξ⟩^{−2} factor of the derivative variant sees v = 1/λ.
    pub(crate) fn unit_integral(&self, x: &[f64], omega: &[f64], v: f64) -> Result<Complex64> {
        let n = self.op.dim();
        let model = self.op.model();
        let s_weight = match self.variant {
            B1Variant::OrderZero => 0.0,
            B1Variant::SDerivative { s } => s as f64,
        };
        let op = &self.op;
        let integrand = move |xx: &[f64], xi: &[f64]| -> Complex64 {
            let b = model.b1(xx, 0.0, &StateSample::ZERO);
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += b[j] * xi[j];
            }
            let mut out = Complex64::new(acc.im, -acc.re);
            if s_weight != 0.0 {
                let g = op.a_r_gradient(xx);
                let mut q = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        q += g[j].get(j, k) * xi[j] * xi[k];
                    }
                }
                let sum: f64 = xi[..n].iter().sum();
                let xi2: f64 = xi[..n].iter().map(|c| c * c).sum();
                out.re += s_weight * q * sum / (v * v + xi2);
            }
            out
        };
        let flow = Flow::new(op, Some(&integrand), FlowOptions { tol: self.opts.tol, ..Default::default() });
        let mut st = flow.start(x, omega);
        let mut rho = (self.opts.tail_factor * op.radius()).max(op.flat_radius());
        loop {
            let outcome = flow.advance(
                &mut st,
                -self.opts.s_budget,
                &mut |s| {
                    let xs = s.x(n);
                    if norm(xs) <= rho {
                        return false;
                    }
                    // Moving away from the origin as s decreases: x·ẋ < 0.
                    let a = op.a_r(xs);
                    let mut axi = [0.0; MAX_DIM];
                    a.mul_vec(s.xi(n), &mut axi);
                    xs.iter().zip(&axi).map(|(p, q)| p * q).sum::<f64>() < 0.0
                },
                &mut |_| {},
            );
            match outcome {
                Advance::Stopped => {}
                Advance::Reached => {
                    return Err(Error::SymbolEvaluation {
                        x: x.to_vec(),
                        xi: omega.to_vec(),
                        reason: format!("ray did not leave |x| ≤ {rho} within the parameter budget"),
                    })
                }
                Advance::StepFailure(reason) => {
                    return Err(Error::SymbolEvaluation { x: x.to_vec(), xi: omega.to_vec(), reason })
                }
            }
            // The state accumulates ∫_0^s, s < 0.
            let integral = -st.integral(n);
            let tail = model.b1_tail_bound(norm(st.x(n)), norm(st.xi(n)));
            if tail <= (1e-8 * integral.norm()).max(1e-16) {
                return Ok(integral);
            }
            rho *= 2.0;
        }
    }
}

impl Symbol for RaySymbol {
    /// NaN when the ray fails; use `try_eval` for the error.
    fn eval(&self, x: &[f64], xi: &[f64]) -> Complex64 {
        self.try_eval(x, xi).unwrap_or(Complex64::new(f64::NAN, f64::NAN))
    }
    fn order(&self) -> f64 {
        0.0
    }
    fn class(&self) -> SymbolClass {
        SymbolClass::Classical
    }
}
