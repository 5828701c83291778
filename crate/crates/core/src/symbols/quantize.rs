use std::ops::Range;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{rows_for, SymbolRef};
use crate::error::{config, Result};
use crate::field::ComplexField;
use crate::grid::{Grid, MAX_DIM};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ApplyMode {
    Dense,
    Chunked { chunk_size: usize },
}

/// Kohn–Nirenberg quantization of a symbol on a grid:
/// Ψ_a f(x) = (2L)^{−n/2} Σ_ξ e^{ix·ξ} a(x, ξ) f̂(ξ), with f̂ the unitary lattice coefficients.
#[derive(Clone)]
pub struct QuantizationPlan {
    grid: Grid,
    symbol: SymbolRef,
    mode: ApplyMode,
    /// e^{i x_j ξ_k}, row j, column k.
    phase: Vec<Complex64>,
}

impl QuantizationPlan {
    pub fn new(grid: Grid, symbol: SymbolRef, mode: ApplyMode) -> Result<Self> {
        if let ApplyMode::Chunked { chunk_size } = mode {
            if chunk_size == 0 {
                return Err(config("chunk_size must be positive"));
            }
        }
        let m = grid.points_per_axis();
        let mut phase = Vec::with_capacity(m * m);
        for j in 0..m {
            let x = grid.coordinate(j);
            for k in 0..m {
                phase.push(Complex64::from_polar(1.0, x * grid.frequency_1d(k)));
            }
        }
        Ok(Self { grid, symbol, mode, phase })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn symbol(&self) -> &SymbolRef {
        &self.symbol
    }

    pub fn mode(&self) -> ApplyMode {
        self.mode
    }

    fn chunk(&self) -> usize {
        match self.mode {
            ApplyMode::Dense => self.grid.len(),
            ApplyMode::Chunked { chunk_size } => chunk_size.min(self.grid.len()),
        }
    }

    /// e^{ix·ξ_i} for consecutive slots i, x the grid point with multi-index `xm`.
    fn fill_phase(&self, xm: &[usize; MAX_DIM], range: Range<usize>, out: &mut [Complex64]) {
        let n = self.grid.dim();
        let m = self.grid.points_per_axis();
        let mut k = self.grid.multi_index(range.start);
        for o in out.iter_mut().take(range.len()) {
            let mut p = self.phase[xm[0] * m + k[0]];
            for d in 1..n {
                p *= self.phase[xm[d] * m + k[d]];
            }
            *o = p;
            let mut d = n;
            while d > 0 {
                d -= 1;
                k[d] += 1;
                if k[d] < m {
                    break;
                }
                k[d] = 0;
            }
        }
    }

    fn check(&self, fields: &[ComplexField]) -> Result<()> {
        for f in fields {
            if !f.grid().same_as(&self.grid) {
                return Err(config("field grid does not match the quantization plan"));
            }
        }
        Ok(())
    }

    pub fn apply(&self, field: &ComplexField) -> Result<ComplexField> {
        Ok(self.apply_many(std::slice::from_ref(field))?.pop().expect("one output"))
    }

    pub fn adjoint(&self, field: &ComplexField) -> Result<ComplexField> {
        Ok(self.adjoint_many(std::slice::from_ref(field))?.pop().expect("one output"))
    }

    /// Applies the plan to several fields with one pass of symbol evaluation.
    pub fn apply_many(&self, fields: &[ComplexField]) -> Result<Vec<ComplexField>> {
        self.check(fields)?;
        let nf = fields.len();
        if nf == 0 {
            return Ok(vec![]);
        }
        let len = self.grid.len();
        // Split real and imaginary parts so the inner accumulation vectorizes.
        let mut spec_re = vec![0.0; len * nf];
        let mut spec_im = vec![0.0; len * nf];
        for (f, field) in fields.iter().enumerate() {
            for (i, c) in field.spectrum().iter().enumerate() {
                spec_re[i * nf + f] = c.re;
                spec_im[i * nf + f] = c.im;
            }
        }
        let scale = (2.0 * self.grid.half_width()).powf(-(self.grid.dim() as f64) / 2.0);
        let rows = rows_for(self.symbol.as_ref(), &self.grid);
        let chunk = self.chunk();
        let mut out = vec![ZERO; len * nf];
        out.par_chunks_mut(nf).enumerate().for_each_init(
            || (vec![ZERO; chunk], vec![ZERO; chunk], vec![0.0; nf], vec![0.0; nf]),
            |(a, ph, part_re, part_im), (x, acc)| {
                let xm = self.grid.multi_index(x);
                let mut start = 0;
                while start < len {
                    let end = (start + chunk).min(len);
                    let w = end - start;
                    rows.fill(x, start..end, &mut a[..w]);
                    self.fill_phase(&xm, start..end, &mut ph[..w]);
                    part_re.fill(0.0);
                    part_im.fill(0.0);
                    for i in 0..w {
                        let k = ph[i] * a[i];
                        let (kr, ki) = (k.re, k.im);
                        let span = (start + i) * nf..(start + i + 1) * nf;
                        multiply_add(kr, ki, &spec_re[span.clone()], &spec_im[span], part_re, part_im);
                    }
                    for ((o, r), m) in acc.iter_mut().zip(part_re.iter()).zip(part_im.iter()) {
                        *o += Complex64::new(*r, *m);
                    }
                    start = end;
                }
                for o in acc.iter_mut() {
                    *o *= scale;
                }
            },
        );
        Ok((0..nf)
            .map(|f| {
                let values = (0..len).map(|x| out[x * nf + f]).collect();
                ComplexField::from_values(self.grid, values).expect("grid length")
            })
            .collect())
    }

    /// Exact discrete adjoint with respect to ⟨u, v⟩ = hⁿΣ u v̄: coefficients
    /// g(ξ) = (2L)^{−n/2} hⁿ Σ_x conj(e^{ix·ξ}a(x, ξ)) v(x), then synthesis from g.
    pub fn adjoint_many(&self, fields: &[ComplexField]) -> Result<Vec<ComplexField>> {
        self.check(fields)?;
        let nf = fields.len();
        if nf == 0 {
            return Ok(vec![]);
        }
        let len = self.grid.len();
        let mut vals_re = vec![0.0; len * nf];
        let mut vals_im = vec![0.0; len * nf];
        for (f, field) in fields.iter().enumerate() {
            for (x, v) in field.values().iter().enumerate() {
                vals_re[x * nf + f] = v.re;
                vals_im[x * nf + f] = v.im;
            }
        }
        let scale = (2.0 * self.grid.half_width()).powf(-(self.grid.dim() as f64) / 2.0) * self.grid.cell_volume();
        let rows = rows_for(self.symbol.as_ref(), &self.grid);
        let chunk = self.chunk();
        let mut g = vec![ZERO; len * nf];
        g.par_chunks_mut(chunk * nf).enumerate().for_each_init(
            || (vec![ZERO; chunk], vec![ZERO; chunk]),
            |(a, ph), (b, block)| {
                let start = b * chunk;
                let w = block.len() / nf;
                let mut acc_re = vec![0.0; w * nf];
                let mut acc_im = vec![0.0; w * nf];
                for x in 0..len {
                    let xm = self.grid.multi_index(x);
                    rows.fill(x, start..start + w, &mut a[..w]);
                    self.fill_phase(&xm, start..start + w, &mut ph[..w]);
                    let (col_re, col_im) = (&vals_re[x * nf..(x + 1) * nf], &vals_im[x * nf..(x + 1) * nf]);
                    for i in 0..w {
                        let k = (ph[i] * a[i]).conj();
                        let span = i * nf..(i + 1) * nf;
                        multiply_add(k.re, k.im, col_re, col_im, &mut acc_re[span.clone()], &mut acc_im[span]);
                    }
                }
                for ((o, r), m) in block.iter_mut().zip(&acc_re).zip(&acc_im) {
                    *o = Complex64::new(*r, *m) * scale;
                }
            },
        );
        (0..nf)
            .map(|f| ComplexField::from_spectrum(self.grid, (0..len).map(|i| g[i * nf + f]).collect()))
            .collect()
    }
}

/// out += k·v over split complex arrays.
#[inline]
fn multiply_add(kr: f64, ki: f64, v_re: &[f64], v_im: &[f64], out_re: &mut [f64], out_im: &mut [f64]) {
    let n = out_re.len();
    let (v_re, v_im, out_im) = (&v_re[..n], &v_im[..n], &mut out_im[..n]);
    for j in 0..n {
        out_re[j] += kr * v_re[j] - ki * v_im[j];
        out_im[j] += kr * v_im[j] + ki * v_re[j];
    }
}

impl std::fmt::Debug for QuantizationPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QuantizationPlan")
            .field("grid", &self.grid)
            .field("order", &self.symbol.order())
            .field("mode", &self.mode)
            .finish()
    }
}

/// E^R = I − Ψ_{k̃}(Ψ_k)^* as a composed action.
#[derive(Clone, Debug)]
pub struct ErOperator {
    k_plus: QuantizationPlan,
    k_minus: QuantizationPlan,
}

pub fn compose_e_r(k_plus_plan: QuantizationPlan, k_minus_plan: QuantizationPlan) -> Result<ErOperator> {
    if !k_plus_plan.grid().same_as(k_minus_plan.grid()) {
        return Err(config("K and K̃ plans must share a grid"));
    }
    Ok(ErOperator { k_plus: k_plus_plan, k_minus: k_minus_plan })
}

impl ErOperator {
    /// Quantizes k = exp(p_e^R) and k̃ = exp(−p_e^R) of `factor` on `grid`.
    pub fn from_factor(factor: &super::IntegratingFactor, grid: Grid, mode: ApplyMode) -> Result<Self> {
        compose_e_r(
            QuantizationPlan::new(grid, factor.k_plus.clone(), mode)?,
            QuantizationPlan::new(grid, factor.k_minus.clone(), mode)?,
        )
    }

    /// ‖Ψ_{k̃}‖ on the grid by power iteration.
    pub fn k_tilde_norm(&self, iterations: usize, seed: u64) -> Result<f64> {
        power_norm(self.k_minus.grid(), iterations, seed, |u| self.k_minus.apply(u), |u| self.k_minus.adjoint(u))
    }

    pub fn k_plan(&self) -> &QuantizationPlan {
        &self.k_plus
    }

    pub fn k_tilde_plan(&self) -> &QuantizationPlan {
        &self.k_minus
    }

    /// (K^R)^* u.
    pub fn k_adjoint(&self, u: &ComplexField) -> Result<ComplexField> {
        self.k_plus.adjoint(u)
    }

    pub fn apply(&self, u: &ComplexField) -> Result<ComplexField> {
        let w = self.k_minus.apply(&self.k_plus.adjoint(u)?)?;
        Ok(u.sub(&w))
    }

    /// (E^R)^* u = u − Ψ_k (Ψ_{k̃})^* u.
    pub fn apply_adjoint(&self, u: &ComplexField) -> Result<ComplexField> {
        let w = self.k_plus.apply(&self.k_minus.adjoint(u)?)?;
        Ok(u.sub(&w))
    }

    /// Operator norm on the grid by power iteration on (E^R)^*E^R from a seeded random start.
    pub fn norm_estimate(&self, iterations: usize, seed: u64) -> Result<f64> {
        power_norm(self.k_plus.grid(), iterations, seed, |u| self.apply(u), |u| self.apply_adjoint(u))
    }
}

/// Estimates ‖A‖ by power iteration on A^*A.
pub(crate) fn power_norm(
    grid: &Grid,
    iterations: usize,
    seed: u64,
    op: impl Fn(&ComplexField) -> Result<ComplexField>,
    adj: impl Fn(&ComplexField) -> Result<ComplexField>,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = ComplexField::from_fn(*grid, |_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let mut est = 0.0f64;
    for _ in 0..iterations.max(1) {
        let nv = v.l2_norm();
        if nv == 0.0 {
            return Ok(0.0);
        }
        v = v.scale(Complex64::new(1.0 / nv, 0.0));
        let av = op(&v)?;
        let next = av.l2_norm();
        let converged = (next - est).abs() <= 1e-4 * next;
        est = next;
        if est < 1e-300 || converged {
            break;
        }
        v = adj(&av)?;
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Signature;
    use crate::symbols::{ConstantSymbol, FnSymbol, ProjectionSymbol, SymbolClass};
    use std::sync::Arc;

    fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> ComplexField {
        ComplexField::from_fn(grid, |_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn max_diff(a: &ComplexField, b: &ComplexField) -> f64 {
        a.values().iter().zip(b.values()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn identity_symbol_is_identity() {
        let grid = Grid::new(2, 5.0, 16).unwrap();
        let plan = QuantizationPlan::new(grid, Arc::new(ConstantSymbol(Complex64::new(1.0, 0.0))), ApplyMode::Dense).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_field(grid, &mut rng);
        assert!(max_diff(&plan.apply(&u).unwrap(), &u) < 1e-12);
        assert!(max_diff(&plan.adjoint(&u).unwrap(), &u) < 1e-12);
    }

    #[test]
    fn derivative_multiplier_matches_spectral_derivative() {
        let grid = Grid::new(2, 4.0, 32).unwrap();
        let plan = QuantizationPlan::new(grid, Arc::new(FnSymbol::multiplier(1.0, |xi| Complex64::new(0.0, xi[1]))), ApplyMode::Chunked { chunk_size: 100 }).unwrap();
        let u = ComplexField::plane_wave(grid, &[3, -5])
            .unwrap()
            .add(&ComplexField::plane_wave(grid, &[-2, 7]).unwrap().scale(Complex64::new(0.5, -1.0)));
        let d = max_diff(&plan.apply(&u).unwrap(), &u.derivative(1));
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn real_multiplier_is_self_adjoint() {
        let grid = Grid::new(1, 3.0, 32).unwrap();
        let plan = QuantizationPlan::new(grid, Arc::new(FnSymbol::multiplier(0.0, |xi| Complex64::new(1.0 / (1.0 + xi[0] * xi[0]), 0.0))), ApplyMode::Dense).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_field(grid, &mut rng);
        assert!(max_diff(&plan.apply(&u).unwrap(), &plan.adjoint(&u).unwrap()) < 1e-13);
    }

    #[test]
    fn projection_symbol_adjoint_pairing() {
        let grid = Grid::new(2, 4.0, 16).unwrap();
        let sym = ProjectionSymbol::new(Signature::new(2, 1).unwrap(), 0.0, |z, x, xi| {
            Complex64::new((-(z[0] * z[0] + z[1] * z[1]) / 4.0).exp(), 0.3 * (x[0] - xi[1]).sin())
        });
        let plan = QuantizationPlan::new(grid, Arc::new(sym), ApplyMode::Chunked { chunk_size: 37 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let us: Vec<_> = (0..100).map(|_| random_field(grid, &mut rng)).collect();
        let vs: Vec<_> = (0..100).map(|_| random_field(grid, &mut rng)).collect();
        let au = plan.apply_many(&us).unwrap();
        let av = plan.adjoint_many(&vs).unwrap();
        for i in 0..100 {
            let lhs = au[i].inner(&vs[i]);
            let rhs = us[i].inner(&av[i]);
            assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
        }
        // Batched and single applications agree.
        assert!(max_diff(&plan.apply(&us[7]).unwrap(), &au[7]) < 1e-13);
    }

    #[test]
    fn dense_and_chunked_agree() {
        let grid = Grid::new(2, 4.0, 16).unwrap();
        let sym: SymbolRef = Arc::new(FnSymbol::new(0.0, SymbolClass::Classical, |x, xi| {
            Complex64::new((x[0] * xi[1]).cos(), x[1] / (1.0 + xi[0] * xi[0]))
        }));
        let dense = QuantizationPlan::new(grid, sym.clone(), ApplyMode::Dense).unwrap();
        let chunked = QuantizationPlan::new(grid, sym, ApplyMode::Chunked { chunk_size: 29 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_field(grid, &mut rng);
        assert!(max_diff(&dense.apply(&u).unwrap(), &chunked.apply(&u).unwrap()) < 1e-12);
        assert!(max_diff(&dense.adjoint(&u).unwrap(), &chunked.adjoint(&u).unwrap()) < 1e-12);
        let other = Grid::new(2, 4.0, 8).unwrap();
        assert!(dense.apply(&ComplexField::zeros(other)).is_err());
    }

    #[test]
    fn identity_factors_give_vanishing_e_r() {
        let grid = Grid::new(2, 4.0, 16).unwrap();
        let one: SymbolRef = Arc::new(ConstantSymbol(Complex64::new(1.0, 0.0)));
        let e = compose_e_r(
            QuantizationPlan::new(grid, one.clone(), ApplyMode::Dense).unwrap(),
            QuantizationPlan::new(grid, one, ApplyMode::Dense).unwrap(),
        )
        .unwrap();
        assert!(e.norm_estimate(5, 1).unwrap() < 1e-12);
    }

    #[test]
    fn power_iteration_finds_multiplier_norm() {
        let grid = Grid::new(1, 3.0, 32).unwrap();
        let sym: SymbolRef = Arc::new(FnSymbol::multiplier(0.0, |xi| Complex64::new(0.0, 2.0 / (1.0 + xi[0] * xi[0]))));
        let plan = QuantizationPlan::new(grid, sym, ApplyMode::Dense).unwrap();
        let est = power_norm(&grid, 200, 9, |u| plan.apply(u), |u| plan.adjoint(u)).unwrap();
        assert!((est - 2.0).abs() < 1e-3, "{est}");
    }
}
