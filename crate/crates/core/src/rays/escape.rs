use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta, beta_reg};

use crate::coefficients::{CoefficientModel, StateSample};
use crate::error::{Error, Result};
use crate::grid::{dot, japanese, norm, Signature, MAX_DIM};
use crate::linalg::SmallMatrix;
use crate::sampling::Halton;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscapeFamily {
    FlatAnalytic,
}

/// Order-zero escape symbol p(x, ξ) = g(x·A_hξ/|ξ|) with g(r) = ∫₀^r ⟨ρ⟩^{−Ñ} dρ.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EscapeFunction {
    pub signature: Signature,
    pub ntilde: f64,
    pub family: EscapeFamily,
    half_beta: f64,
}

pub fn escape_function_flat(signature: Signature, ntilde: f64) -> Result<EscapeFunction> {
    if !(ntilde > 1.0) {
        return Err(Error::Domain(format!("Ñ = {ntilde} must exceed 1 for a bounded escape function")));
    }
    Ok(EscapeFunction {
        signature,
        ntilde,
        family: EscapeFamily::FlatAnalytic,
        half_beta: 0.5 * beta(0.5, (ntilde - 1.0) / 2.0),
    })
}

impl EscapeFunction {
    /// g(r); odd, increasing, |g| < ∫₀^∞⟨ρ⟩^{−Ñ}dρ.
    pub fn g(&self, r: f64) -> f64 {
        let u = r * r / (1.0 + r * r);
        r.signum() * self.half_beta * beta_reg(0.5, (self.ntilde - 1.0) / 2.0, u)
    }

    #[inline]
    pub fn g_prime(&self, r: f64) -> f64 {
        (1.0 + r * r).powf(-self.ntilde / 2.0)
    }

    /// sup |p| = ∫₀^∞⟨ρ⟩^{−Ñ}dρ.
    pub fn sup_bound(&self) -> f64 {
        self.half_beta
    }

    #[inline]
    fn argument(&self, x: &[f64], xi: &[f64]) -> (f64, [f64; MAX_DIM], f64) {
        let n = self.signature.dim();
        let mut ax = [0.0; MAX_DIM];
        self.signature.apply(xi, &mut ax);
        let nxi = norm(&xi[..n]);
        (dot(&x[..n], &ax[..n]) / nxi, ax, nxi)
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> f64 {
        self.g(self.argument(x, xi).0)
    }

    /// (∂_x p, ∂_ξ p).
    pub fn gradient(&self, x: &[f64], xi: &[f64]) -> ([f64; MAX_DIM], [f64; MAX_DIM]) {
        let n = self.signature.dim();
        let (r, a_xi, nxi) = self.argument(x, xi);
        let gp = self.g_prime(r);
        let mut a_x = [0.0; MAX_DIM];
        self.signature.apply(x, &mut a_x);
        let mut dx = [0.0; MAX_DIM];
        let mut dxi = [0.0; MAX_DIM];
        for j in 0..n {
            dx[j] = gp * a_xi[j] / nxi;
            dxi[j] = gp * (a_x[j] / nxi - r * xi[j] / (nxi * nxi));
        }
        (dx, dxi)
    }

    /// Poisson bracket H_{h₂}p = ∂_ξh₂·∂_x p − ∂_x h₂·∂_ξ p for h₂ = ⟨a ξ, ξ⟩.
    pub fn poisson_bracket(&self, a: &SmallMatrix, da: &[SmallMatrix; MAX_DIM], x: &[f64], xi: &[f64]) -> f64 {
        let n = self.signature.dim();
        let (px, pxi) = self.gradient(x, xi);
        let mut axi = [0.0; MAX_DIM];
        a.mul_vec(xi, &mut axi);
        let mut acc = 0.0;
        for j in 0..n {
            acc += 2.0 * axi[j] * px[j] - da[j].quadratic(xi) * pxi[j];
        }
        acc
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GardingOptions {
    pub seed: u64,
    /// Half-width of the sampled position box.
    pub x_half: f64,
    /// Upper limit of sampled |ξ| (lower limit is 1, where the cutoff χ switches on).
    pub xi_max: f64,
}

impl GardingOptions {
    pub fn for_grid(grid: &crate::grid::Grid) -> Self {
        Self { seed: 3, x_half: grid.half_width(), xi_max: grid.max_frequency() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GardingMargin {
    /// min over samples of H_{h₂}p − |ξ|/(2⟨x⟩^Ñ) + 2c₀.
    pub value: f64,
    pub worst_x: Vec<f64>,
    pub worst_xi: Vec<f64>,
    pub samples: usize,
}

/// Fills `xi` with a point of 1 ≤ |ξ| ≤ xi_max from unit-cube coordinates `u` (n of them).
pub(crate) fn xi_from_unit(u: &[f64], n: usize, xi_max: f64, xi: &mut [f64]) {
    use std::f64::consts::PI;
    let r = 1.0 + (xi_max - 1.0) * u[0];
    match n {
        1 => xi[0] = if u.len() > 1 && u[1] < 0.5 { -r } else { r },
        2 => {
            let th = 2.0 * PI * u[1];
            xi[0] = r * th.cos();
            xi[1] = r * th.sin();
        }
        _ => {
            let z = 2.0 * u[1] - 1.0;
            let ph = 2.0 * PI * u[2];
            let rho = (1.0 - z * z).max(0.0).sqrt();
            xi[0] = r * rho * ph.cos();
            xi[1] = r * rho * ph.sin();
            xi[2] = r * z;
        }
    }
}

/// Sampled lower margin of the escape inequality H_{h₂}p ≥ |ξ|/(2⟨x⟩^Ñ) − 2c₀ at time t.
pub fn garding_margin(
    model: &CoefficientModel,
    p: &EscapeFunction,
    t: f64,
    sample_budget: usize,
    c0: f64,
    opts: &GardingOptions,
) -> Result<GardingMargin> {
    if sample_budget < 10_000 {
        return Err(Error::Precondition(format!("sample_budget {sample_budget} must be at least 10^4")));
    }
    let n = model.dim();
    let udim = if n == 1 { 2 } else { n };
    let mut seq = Halton::new(n + udim, opts.seed);
    let mut u = vec![0.0; n + udim];
    let mut best = f64::INFINITY;
    let mut worst_x = vec![0.0; n];
    let mut worst_xi = vec![0.0; n];
    let mut x = [0.0; MAX_DIM];
    let mut xi = [0.0; MAX_DIM];
    for _ in 0..sample_budget {
        seq.next_point(&mut u);
        for d in 0..n {
            x[d] = opts.x_half * (2.0 * u[d] - 1.0);
        }
        xi_from_unit(&u[n..], n, opts.xi_max, &mut xi);
        let a = model.a(&x[..n], t, &StateSample::ZERO);
        let da = model.a_gradient(&x[..n], t, &StateSample::ZERO);
        let hp = p.poisson_bracket(&a, &da, &x[..n], &xi[..n]);
        let m = hp - norm(&xi[..n]) / (2.0 * japanese(&x[..n]).powf(p.ntilde)) + 2.0 * c0;
        if m < best {
            best = m;
            worst_x.copy_from_slice(&x[..n]);
            worst_xi.copy_from_slice(&xi[..n]);
        }
    }
    Ok(GardingMargin { value: best, worst_x, worst_xi, samples: sample_budget })
}

/// Earliest time at which the sampled margin stops being positive, located by doubling from
/// `t_start` up to `t_limit` and then bisecting. `None` when positive throughout.
pub fn garding_threshold(
    model: &CoefficientModel,
    p: &EscapeFunction,
    c0: f64,
    sample_budget: usize,
    opts: &GardingOptions,
    t_start: f64,
    t_limit: f64,
) -> Result<Option<f64>> {
    let positive = |t: f64| -> Result<bool> { Ok(garding_margin(model, p, t, sample_budget, c0, opts)?.value > 0.0) };
    if !positive(0.0)? {
        return Ok(Some(0.0));
    }
    let mut lo = 0.0;
    let mut hi = t_start.max(1e-6);
    while positive(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > t_limit {
            return Ok(None);
        }
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if positive(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(hi))
}
