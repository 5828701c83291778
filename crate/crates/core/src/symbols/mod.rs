//! Phase-space symbols, their Kohn–Nirenberg quantization on the grid, and the integrating
//! factors built from ray integrals of the first-order coefficient.

mod factor;
mod quantize;
mod ray_symbol;
mod seminorm;
mod table;
mod truncation;

use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cutoff::cutoff_chi;
use crate::error::{Error, Result};
use crate::grid::{norm, Grid, Signature, MAX_DIM};

pub use factor::{IntegratingFactor, TableKind, TableSymbol};
pub use quantize::{compose_e_r, ApplyMode, ErOperator, QuantizationPlan};
pub use ray_symbol::{B1Variant, RaySymbol, RaySymbolOptions};
pub use seminorm::{seminorm_estimate, SeminormBudget};
pub use table::{cache_file_name, DirectionSet, RayTable, RayTableKey};
pub use truncation::{truncate, TruncatedOperator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolClass {
    ProjectionClass,
    Classical,
    Multiplier,
}

/// Fills symbol values a(x_index, ξ_i) for consecutive lattice slots i.
pub trait RowEvaluator: Sync {
    fn fill(&self, x_index: usize, range: Range<usize>, out: &mut [Complex64]);
}

/// An evaluable phase-space function a(x, ξ) of order m.
pub trait Symbol: Send + Sync {
    fn eval(&self, x: &[f64], xi: &[f64]) -> Complex64;
    fn order(&self) -> f64;
    fn class(&self) -> SymbolClass;

    /// Specialized row evaluator on `grid`; `None` selects the generic pointwise path.
    fn row_evaluator<'a>(&'a self, _grid: &Grid) -> Option<Box<dyn RowEvaluator + 'a>> {
        None
    }
}

pub type SymbolRef = Arc<dyn Symbol>;

/// Generic rows: pointwise `eval` at grid positions and lattice frequencies.
pub(crate) struct PointwiseRows<'a> {
    symbol: &'a dyn Symbol,
    positions: Vec<[f64; MAX_DIM]>,
    frequencies: Vec<[f64; MAX_DIM]>,
    n: usize,
}

impl<'a> PointwiseRows<'a> {
    pub(crate) fn new(symbol: &'a dyn Symbol, grid: &Grid) -> Self {
        Self { symbol, positions: grid.positions(), frequencies: grid.frequencies(), n: grid.dim() }
    }
}

impl RowEvaluator for PointwiseRows<'_> {
    fn fill(&self, x_index: usize, range: Range<usize>, out: &mut [Complex64]) {
        let x = &self.positions[x_index][..self.n];
        for (o, i) in out.iter_mut().zip(range) {
            *o = self.symbol.eval(x, &self.frequencies[i][..self.n]);
        }
    }
}

pub(crate) fn rows_for<'a>(symbol: &'a dyn Symbol, grid: &Grid) -> Box<dyn RowEvaluator + 'a> {
    symbol.row_evaluator(grid).unwrap_or_else(|| Box::new(PointwiseRows::new(symbol, grid)))
}

/// P(y, z) = y − (y·z)z/|z|², the projection onto the hyperplane orthogonal to z.
pub fn projection(y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    let nz2: f64 = z.iter().map(|v| v * v).sum();
    if !(nz2 > 0.0) {
        return Err(Error::Domain("projection direction z must be non-zero".into()));
    }
    let c = y.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() / nz2;
    Ok(y.iter().zip(z).map(|(a, b)| a - c * b).collect())
}

#[inline]
fn project_into(y: &[f64], z: &[f64], out: &mut [f64]) {
    let nz2: f64 = z.iter().map(|v| v * v).sum();
    let c = y.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() / nz2;
    for ((o, a), b) in out.iter_mut().zip(y).zip(z) {
        *o = a - c * b;
    }
}

/// a(x, ξ) ≡ c.
#[derive(Clone, Copy, Debug)]
pub struct ConstantSymbol(pub Complex64);

struct ConstantRows(Complex64);

impl RowEvaluator for ConstantRows {
    fn fill(&self, _x: usize, _range: Range<usize>, out: &mut [Complex64]) {
        out.fill(self.0);
    }
}

impl Symbol for ConstantSymbol {
    fn eval(&self, _x: &[f64], _xi: &[f64]) -> Complex64 {
        self.0
    }
    fn order(&self) -> f64 {
        0.0
    }
    fn class(&self) -> SymbolClass {
        SymbolClass::Multiplier
    }
    fn row_evaluator<'a>(&'a self, _grid: &Grid) -> Option<Box<dyn RowEvaluator + 'a>> {
        Some(Box::new(ConstantRows(self.0)))
    }
}

type PhaseFn = dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync;

/// Closure-backed symbol.
pub struct FnSymbol {
    f: Box<PhaseFn>,
    order: f64,
    class: SymbolClass,
}

impl FnSymbol {
    pub fn new(order: f64, class: SymbolClass, f: impl Fn(&[f64], &[f64]) -> Complex64 + Send + Sync + 'static) -> Self {
        Self { f: Box::new(f), order, class }
    }

    /// A Fourier multiplier m(ξ).
    pub fn multiplier(order: f64, m: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static) -> Self {
        Self::new(order, SymbolClass::Multiplier, move |_, xi| m(xi))
    }
}

impl Symbol for FnSymbol {
    fn eval(&self, x: &[f64], xi: &[f64]) -> Complex64 {
        (self.f)(x, xi)
    }
    fn order(&self) -> f64 {
        self.order
    }
    fn class(&self) -> SymbolClass {
        self.class
    }
}

type AmplitudeFn = dyn Fn(&[f64], &[f64], &[f64]) -> Complex64 + Send + Sync;

/// χ(|ξ|)·a(P(x, A_hξ); x, ξ) for an amplitude a(z; x, ξ).
pub struct ProjectionSymbol {
    signature: Signature,
    amplitude: Box<AmplitudeFn>,
    order: f64,
}

impl ProjectionSymbol {
    pub fn new(
        signature: Signature,
        order: f64,
        amplitude: impl Fn(&[f64], &[f64], &[f64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self { signature, amplitude: Box::new(amplitude), order }
    }
}

impl Symbol for ProjectionSymbol {
    fn eval(&self, x: &[f64], xi: &[f64]) -> Complex64 {
        let n = self.signature.dim();
        let chi = cutoff_chi(norm(&xi[..n]));
        if chi == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let mut axi = [0.0; MAX_DIM];
        self.signature.apply(xi, &mut axi);
        let mut z = [0.0; MAX_DIM];
        project_into(&x[..n], &axi[..n], &mut z[..n]);
        (self.amplitude)(&z[..n], &x[..n], &xi[..n]) * chi
    }
    fn order(&self) -> f64 {
        self.order
    }
    fn class(&self) -> SymbolClass {
        SymbolClass::ProjectionClass
    }
}

/// ½(a(x, ξ) + a(x, −ξ)).
pub struct EvenPart(pub SymbolRef);

impl Symbol for EvenPart {
    fn eval(&self, x: &[f64], xi: &[f64]) -> Complex64 {
        let mut neg = [0.0; MAX_DIM];
        for (o, v) in neg.iter_mut().zip(xi) {
            *o = -v;
        }
        (self.0.eval(x, xi) + self.0.eval(x, &neg[..xi.len()])) * 0.5
    }
    fn order(&self) -> f64 {
        self.0.order()
    }
    fn class(&self) -> SymbolClass {
        self.0.class()
    }
}

pub fn even_part(p: SymbolRef) -> SymbolRef {
    Arc::new(EvenPart(p))
}

/// exp(sign·a(x, ξ)) for an order-zero exponent.
pub struct ExpSymbol {
    pub inner: SymbolRef,
    pub sign: f64,
}

impl Symbol for ExpSymbol {
    fn eval(&self, x: &[f64], xi: &[f64]) -> Complex64 {
        (self.inner.eval(x, xi) * self.sign).exp()
    }
    fn order(&self) -> f64 {
        0.0
    }
    fn class(&self) -> SymbolClass {
        self.inner.class()
    }
}

/// Central-difference ∂_x^β of a symbol.
pub struct XDerivative {
    pub inner: SymbolRef,
    pub beta: [usize; MAX_DIM],
    pub step: f64,
}

impl Symbol for XDerivative {
    fn eval(&self, x: &[f64], xi: &[f64]) -> Complex64 {
        let mut xs = [0.0; MAX_DIM];
        xs[..x.len()].copy_from_slice(x);
        seminorm::nested_difference(&|p: &[f64], q: &[f64]| self.inner.eval(p, q), &xs[..x.len()], xi, &self.beta, &[0; MAX_DIM], self.step)
    }
    fn order(&self) -> f64 {
        self.inner.order()
    }
    fn class(&self) -> SymbolClass {
        self.inner.class()
    }
}
