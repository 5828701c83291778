use num_complex::Complex64;

use crate::coefficients::{CoefficientModel, StateSample};
use crate::error::{config, Error, Result};
use crate::field::{dealias_keeps, forward_coefficients, inverse_coefficients, ComplexField};
use crate::grid::{Grid, MAX_DIM};
use crate::linalg::SmallMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Per-grid spectral data: lattice frequencies and the 2/3-rule mask.
#[derive(Clone, Debug)]
pub struct SpectralContext {
    grid: Grid,
    xi: Vec<[f64; MAX_DIM]>,
    keep: Vec<bool>,
}

impl SpectralContext {
    pub fn new(grid: Grid) -> Self {
        let keep = (0..grid.len()).map(|i| dealias_keeps(&grid, i)).collect();
        Self { grid, xi: grid.frequencies(), keep }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Largest |ξ|² among slots that survive dealiasing.
    pub fn max_kept_xi2(&self) -> f64 {
        self.xi
            .iter()
            .zip(&self.keep)
            .filter(|(_, k)| **k)
            .map(|(xi, _)| xi.iter().map(|c| c * c).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Dealiased spectral gradient of coefficients `c`, returned in physical space.
    fn gradient(&self, c: &[Complex64]) -> Vec<Vec<Complex64>> {
        (0..self.grid.dim())
            .map(|d| {
                let spec: Vec<Complex64> = c
                    .iter()
                    .enumerate()
                    .map(|(i, v)| if self.keep[i] { v * Complex64::new(0.0, self.xi[i][d]) } else { ZERO })
                    .collect();
                inverse_coefficients(&self.grid, &spec)
            })
            .collect()
    }
}

/// Coefficients of one operator evaluation sampled on the grid.
#[derive(Clone, Debug)]
pub struct SampledCoefficients {
    pub a: Vec<SmallMatrix>,
    pub b1: Option<Vec<[Complex64; MAX_DIM]>>,
    pub b2: Option<Vec<[Complex64; MAX_DIM]>>,
    pub c1: Option<Vec<Complex64>>,
    pub c2: Option<Vec<Complex64>>,
    /// Largest |z⃗| seen while sampling (0 for z-independent models).
    pub max_z: f64,
}

/// State samples z⃗ = (u, ∇u) at every grid point.
pub fn state_samples(ctx: &SpectralContext, source: &ComplexField) -> Vec<StateSample> {
    let n = ctx.grid.dim();
    let grads: Vec<ComplexField> = source.gradient();
    (0..ctx.grid.len())
        .map(|i| {
            let mut s = StateSample { u: source.values()[i], ..StateSample::ZERO };
            for d in 0..n {
                s.grad[d] = grads[d].values()[i];
            }
            s
        })
        .collect()
}

/// Samples the coefficients at time t; `z` supplies the state for quasilinear models. A finite
/// `r0` turns |z⃗| > r0 into a range error.
pub fn sample_coefficients(
    model: &CoefficientModel,
    grid: &Grid,
    t: f64,
    z: Option<&[StateSample]>,
    r0: f64,
) -> Result<SampledCoefficients> {
    if model.dim() != grid.dim() {
        return Err(config("model and grid dimensions differ"));
    }
    let n = grid.dim();
    let quasi = model.is_quasilinear();
    if let Some(z) = z {
        if z.len() != grid.len() {
            return Err(config("state samples do not match the grid"));
        }
    }
    let mut max_z = 0.0f64;
    let zat = |i: usize| -> StateSample { z.map_or(StateSample::ZERO, |z| z[i]) };
    if quasi {
        if let Some(z) = z {
            max_z = z.iter().map(|s| s.magnitude()).fold(0.0, f64::max);
        }
        if max_z > r0 {
            return Err(Error::Range { max_z, r0 });
        }
    }
    let spec = model.spec();
    let mut x = [0.0; MAX_DIM];
    let mut a = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        grid.position(i, &mut x);
        a.push(model.a(&x[..n], t, &zat(i)));
    }
    let sample_vec = |f: &dyn Fn(&[f64], &StateSample) -> [Complex64; MAX_DIM]| {
        let mut x = [0.0; MAX_DIM];
        (0..grid.len())
            .map(|i| {
                grid.position(i, &mut x);
                f(&x[..n], &zat(i))
            })
            .collect::<Vec<_>>()
    };
    let sample_scalar = |f: &dyn Fn(&[f64], &StateSample) -> Complex64| {
        let mut x = [0.0; MAX_DIM];
        (0..grid.len())
            .map(|i| {
                grid.position(i, &mut x);
                f(&x[..n], &zat(i))
            })
            .collect::<Vec<_>>()
    };
    let b1 = (spec.b1.is_some() || quasi).then(|| sample_vec(&|x, z| model.b1(x, t, z)));
    let b2 = spec.b2.is_some().then(|| sample_vec(&|x, z| model.b2(x, t, z)));
    let c1 = (spec.c1.is_some() || quasi).then(|| sample_scalar(&|x, z| model.c1(x, t, z)));
    let c2 = spec.c2.is_some().then(|| sample_scalar(&|x, z| model.c2(x, t, z)));
    Ok(SampledCoefficients { a, b1, b2, c1, c2, max_z })
}

/// Principal part −i∂_j(a_{jk}∂_k u) plus the lower-order terms b₁·∇u + b₂·∇ū + c₁u + c₂ū.
/// Gradients are 2/3-dealiased before the products and every product is dealiased again, so
/// ⟨∂_j P(a_{jk} P∂_k u), u⟩ is real for real symmetric a.
pub fn apply_sampled(ctx: &SpectralContext, coeffs: &SampledCoefficients, u: &ComplexField) -> ComplexField {
    let grid = ctx.grid;
    let n = grid.dim();
    let len = grid.len();
    let c = u.spectrum();
    let grads = ctx.gradient(c);
    let mut out_spec = vec![ZERO; len];
    for j in 0..n {
        let w: Vec<Complex64> = (0..len)
            .map(|i| {
                let a = &coeffs.a[i];
                let mut s = ZERO;
                for k in 0..n {
                    s += grads[k][i] * a.get(j, k);
                }
                s
            })
            .collect();
        let wc = forward_coefficients(&grid, &w);
        for i in 0..len {
            if ctx.keep[i] {
                // −i · (iξ_j) ŵ_j = ξ_j ŵ_j
                out_spec[i] += wc[i] * ctx.xi[i][j];
            }
        }
    }
    let lower = coeffs.b1.is_some() || coeffs.b2.is_some() || coeffs.c1.is_some() || coeffs.c2.is_some();
    if lower {
        let uv = u.values();
        let mut low = vec![ZERO; len];
        for i in 0..len {
            let mut s = ZERO;
            if let Some(b) = &coeffs.b1 {
                for d in 0..n {
                    s += b[i][d] * grads[d][i];
                }
            }
            if let Some(b) = &coeffs.b2 {
                for d in 0..n {
                    s += b[i][d] * grads[d][i].conj();
                }
            }
            if let Some(c1) = &coeffs.c1 {
                s += c1[i] * uv[i];
            }
            if let Some(c2) = &coeffs.c2 {
                s += c2[i] * uv[i].conj();
            }
            low[i] = s;
        }
        let lc = forward_coefficients(&grid, &low);
        for i in 0..len {
            if ctx.keep[i] {
                out_spec[i] += lc[i];
            }
        }
    }
    ComplexField::from_spectrum(grid, out_spec).expect("grid length")
}

/// ℒu = −∂_j(a_{jk}∂_k u), the real principal operator with the same discretization.
pub fn apply_principal(ctx: &SpectralContext, coeffs: &SampledCoefficients, u: &ComplexField) -> ComplexField {
    let principal = SampledCoefficients { b1: None, b2: None, c1: None, c2: None, ..coeffs.clone() };
    // −i ℒ = apply ⇒ ℒ = i · apply.
    apply_sampled(ctx, &principal, u).scale(Complex64::new(0.0, 1.0))
}

/// L(x, t)u for `model`; quasilinear models take z⃗ from `z_source`.
#[allow(non_snake_case)]
pub fn apply_L(model: &CoefficientModel, t: f64, u: &ComplexField, z_source: Option<&ComplexField>) -> Result<ComplexField> {
    let ctx = SpectralContext::new(*u.grid());
    let z = match (model.is_quasilinear(), z_source) {
        (true, None) => return Err(Error::Precondition("quasilinear model requires a z source field".into())),
        (true, Some(src)) => {
            src.ensure_same_grid(u)?;
            Some(state_samples(&ctx, src))
        }
        (false, _) => None,
    };
    let coeffs = sample_coefficients(model, u.grid(), t, z.as_deref(), f64::INFINITY)?;
    Ok(apply_sampled(&ctx, &coeffs, u))
}

/// L with all coefficients evaluated at z⃗ = 0.
#[allow(non_snake_case)]
pub fn apply_L_linearized(model: &CoefficientModel, t: f64, u: &ComplexField) -> Result<ComplexField> {
    let ctx = SpectralContext::new(*u.grid());
    let coeffs = sample_coefficients(model, u.grid(), t, None, f64::INFINITY)?;
    Ok(apply_sampled(&ctx, &coeffs, u))
}

/// |Re i⟨ℒu, u⟩| / max(|⟨ℒu, u⟩|, ‖u‖²): zero for real symmetric a up to rounding.
pub fn self_adjoint_residual(ctx: &SpectralContext, coeffs: &SampledCoefficients, u: &ComplexField) -> f64 {
    let lu = apply_principal(ctx, coeffs, u);
    let p = lu.inner(u);
    let scale = p.norm().max(u.l2_norm().powi(2));
    if scale == 0.0 {
        return 0.0;
    }
    (Complex64::new(0.0, 1.0) * p).re.abs() / scale
}
