//! Complex grid functions with a lazily cached spectral representation.
//!
//! Spectral coefficients use the unitary pairing between L²([−L, L)ⁿ) and ℓ² of the
//! frequency lattice:
//!
//!   c(ξ) = (2L)^{−n/2} hⁿ Σ_x f(x) e^{−ix·ξ},   f(x) = (2L)^{−n/2} Σ_ξ c(ξ) e^{ix·ξ},
//!
//! so that ‖f‖₂² = hⁿ Σ|f|² = Σ|c|².

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::fft;
use crate::grid::{Grid, MAX_DIM};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Inverse,
}

#[inline]
fn parity_sign(grid: &Grid, idx: usize) -> f64 {
    let mi = grid.multi_index(idx);
    if mi[..grid.dim()].iter().sum::<usize>() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Physical samples → normalized lattice coefficients.
pub fn forward_coefficients(grid: &Grid, values: &[Complex64]) -> Vec<Complex64> {
    let mut data = values.to_vec();
    fft::transform(&mut data, grid.dim(), grid.points_per_axis(), false);
    let scale = (2.0 * grid.half_width()).powf(grid.dim() as f64 / 2.0) / grid.len() as f64;
    for (idx, v) in data.iter_mut().enumerate() {
        *v *= scale * parity_sign(grid, idx);
    }
    data
}

/// Normalized lattice coefficients → physical samples.
pub fn inverse_coefficients(grid: &Grid, coeffs: &[Complex64]) -> Vec<Complex64> {
    let scale = (2.0 * grid.half_width()).powf(-(grid.dim() as f64) / 2.0);
    let mut data: Vec<Complex64> =
        coeffs.iter().enumerate().map(|(idx, c)| c * (scale * parity_sign(grid, idx))).collect();
    fft::transform(&mut data, grid.dim(), grid.points_per_axis(), true);
    data
}

/// True when the lattice slot survives 2/3-rule truncation (|k̃_d| < M/3 on every axis).
#[inline]
pub fn dealias_keeps(grid: &Grid, idx: usize) -> bool {
    let mi = grid.multi_index(idx);
    let m = grid.points_per_axis() as i64;
    (0..grid.dim()).all(|d| 3 * grid.wavenumber(mi[d]).abs() < m)
}

#[derive(Clone, Debug)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl ComplexField {
    pub fn zeros(grid: Grid) -> Self {
        Self::from_values_unchecked(grid, vec![ZERO; grid.len()])
    }

    pub fn from_values(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(config(format!(
                "field has {} samples but the grid has {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self::from_values_unchecked(grid, values))
    }

    fn from_values_unchecked(grid: Grid, values: Vec<Complex64>) -> Self {
        Self { grid, values, spectrum: OnceLock::new() }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let mut x = [0.0; MAX_DIM];
        let values = (0..grid.len())
            .map(|i| {
                grid.position(i, &mut x);
                f(&x[..grid.dim()])
            })
            .collect();
        Self::from_values_unchecked(grid, values)
    }

    pub fn from_spectrum(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(config("spectrum length does not match the grid"));
        }
        let values = inverse_coefficients(&grid, &coeffs);
        let out = Self::from_values_unchecked(grid, values);
        let _ = out.spectrum.set(coeffs);
        Ok(out)
    }

    /// e^{iξ·x} for the lattice frequency with the given signed wavenumbers.
    pub fn plane_wave(grid: Grid, wavenumbers: &[i64]) -> Result<Self> {
        let slot = grid.slot_of_wavenumbers(wavenumbers)?;
        let mut xi = [0.0; MAX_DIM];
        grid.frequency(slot, &mut xi);
        let n = grid.dim();
        Ok(Self::from_fn(grid, |x| {
            let phase: f64 = (0..n).map(|d| x[d] * xi[d]).sum();
            Complex64::from_polar(1.0, phase)
        }))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| forward_coefficients(&self.grid, &self.values))
    }

    pub fn has_cached_spectrum(&self) -> bool {
        self.spectrum.get().is_some()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell_volume() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    /// ⟨self, other⟩ = hⁿ Σ self · conj(other).
    pub fn inner(&self, other: &ComplexField) -> Complex64 {
        debug_assert!(self.grid.same_as(&other.grid));
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        s * self.grid.cell_volume()
    }

    pub fn ensure_same_grid(&self, other: &ComplexField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(config("fields live on different grids"))
        }
    }

    pub fn map_values(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::from_values_unchecked(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &ComplexField, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        debug_assert!(self.grid.same_as(&other.grid));
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self::from_values_unchecked(self.grid, values)
    }

    pub fn conj(&self) -> Self {
        self.map_values(|v| v.conj())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map_values(|v| v * s)
    }

    pub fn add(&self, other: &ComplexField) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ComplexField) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    /// Applies the Fourier multiplier m(ξ) slot by slot.
    pub fn apply_multiplier(&self, m: impl Fn(usize, &[f64]) -> Complex64) -> Self {
        let spec = self.spectrum();
        let mut xi = [0.0; MAX_DIM];
        let n = self.grid.dim();
        let coeffs = spec
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                self.grid.frequency(idx, &mut xi);
                c * m(idx, &xi[..n])
            })
            .collect();
        Self::from_spectrum(self.grid, coeffs).expect("length preserved")
    }

    /// Spectral ∂_{x_axis}; the unpaired Nyquist mode is dropped so real fields stay real.
    pub fn derivative(&self, axis: usize) -> Self {
        let half = self.grid.points_per_axis() / 2;
        let grid = self.grid;
        self.apply_multiplier(|idx, xi| {
            if grid.multi_index(idx)[axis] == half {
                ZERO
            } else {
                Complex64::new(0.0, xi[axis])
            }
        })
    }

    pub fn gradient(&self) -> Vec<Self> {
        (0..self.grid.dim()).map(|d| self.derivative(d)).collect()
    }

    /// Spectral Laplacian with multiplier −|ξ|² (Nyquist retained).
    pub fn laplacian(&self) -> Self {
        self.apply_multiplier(|_, xi| Complex64::new(-xi.iter().map(|c| c * c).sum::<f64>(), 0.0))
    }

    /// 2/3-rule projection.
    pub fn dealiased(&self) -> Self {
        let grid = self.grid;
        self.apply_multiplier(|idx, _| if dealias_keeps(&grid, idx) { Complex64::new(1.0, 0.0) } else { ZERO })
    }
}

/// Unitary transform to (forward) or from (inverse) lattice coefficients.
///
/// The forward result holds coefficients c(ξ) in FFT slot order on the same grid object.
pub fn spectral_transform(field: &ComplexField, direction: Direction) -> ComplexField {
    let grid = *field.grid();
    let values = match direction {
        Direction::Forward => field.spectrum().to_vec(),
        Direction::Inverse => inverse_coefficients(&grid, field.values()),
    };
    ComplexField::from_values_unchecked(grid, values)
}

/// J^s = ⟨D⟩^s, multiplier (1 + |ξ|²)^{s/2}.
pub fn bessel_apply(field: &ComplexField, s: f64) -> ComplexField {
    if s == 0.0 {
        return field.clone();
    }
    field.apply_multiplier(|_, xi| Complex64::new((1.0 + xi.iter().map(|c| c * c).sum::<f64>()).powf(s / 2.0), 0.0))
}

/// ‖⟨x⟩^r J^s u‖₂ by the grid quadrature.
pub fn weighted_norm(field: &ComplexField, s: f64, r: f64) -> f64 {
    let js = bessel_apply(field, s);
    if r == 0.0 {
        return js.l2_norm();
    }
    let grid = *field.grid();
    let n = grid.dim();
    let mut x = [0.0; MAX_DIM];
    let acc: f64 = js
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            grid.position(i, &mut x);
            let w = 1.0 + x[..n].iter().map(|c| c * c).sum::<f64>();
            w.powf(r) * v.norm_sqr()
        })
        .sum();
    (grid.cell_volume() * acc).sqrt()
}

/// ‖J^s u‖₂.
pub fn sobolev_norm(field: &ComplexField, s: f64) -> f64 {
    if s == 0.0 {
        return field.l2_norm();
    }
    let acc: f64 = field
        .spectrum()
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let mut xi = [0.0; MAX_DIM];
            field.grid().frequency(idx, &mut xi);
            (1.0 + xi.iter().map(|v| v * v).sum::<f64>()).powf(s) * c.norm_sqr()
        })
        .sum();
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: Grid, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len()).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        ComplexField::from_values(grid, values).unwrap()
    }

    #[test]
    fn constant_maps_to_dc() {
        let grid = Grid::new(2, 3.0, 16).unwrap();
        let one = ComplexField::from_fn(grid, |_| Complex64::new(1.0, 0.0));
        let spec = one.spectrum();
        assert!((spec[0] - Complex64::new(6.0, 0.0)).norm() < 1e-12);
        assert!(spec[1..].iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn plane_wave_is_delta() {
        let grid = Grid::new(2, 5.0, 16).unwrap();
        let w = ComplexField::plane_wave(grid, &[3, -2]).unwrap();
        let slot = grid.slot_of_wavenumbers(&[3, -2]).unwrap();
        for (i, c) in w.spectrum().iter().enumerate() {
            let expected = if i == slot { 10.0 } else { 0.0 };
            assert!((c - Complex64::new(expected, 0.0)).norm() < 1e-11, "slot {i}");
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        for (dim, m) in [(1, 64), (2, 32), (3, 8)] {
            let grid = Grid::new(dim, 4.0, m).unwrap();
            let f = random_field(grid, 7);
            let fwd = spectral_transform(&f, Direction::Forward);
            let back = spectral_transform(&fwd, Direction::Inverse);
            let err = back.sub(&f).l2_norm() / f.l2_norm();
            assert!(err < 1e-12, "dim {dim}: {err}");
            let spec_norm: f64 = fwd.values().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            assert!((spec_norm - f.l2_norm()).abs() < 1e-12 * f.l2_norm());
        }
    }

    #[test]
    fn bessel_on_plane_wave() {
        let grid = Grid::new(2, 5.0, 16).unwrap();
        let w = ComplexField::plane_wave(grid, &[2, 1]).unwrap();
        let xi2 = (std::f64::consts::PI / 5.0).powi(2) * 5.0;
        let out = bessel_apply(&w, 1.0);
        let expected = w.scale(Complex64::new((1.0 + xi2).sqrt(), 0.0));
        assert!(out.sub(&expected).l2_norm() < 1e-12 * expected.l2_norm());
    }

    #[test]
    fn bessel_inverse_pair() {
        let grid = Grid::new(2, 5.0, 32).unwrap();
        let f = random_field(grid, 3);
        let back = bessel_apply(&bessel_apply(&f, -1.0), 1.0);
        assert!(back.sub(&f).l2_norm() < 1e-12 * f.l2_norm());
    }

    #[test]
    fn weighted_norm_closed_forms() {
        let grid = Grid::new(2, 10.0, 128).unwrap();
        assert_eq!(weighted_norm(&ComplexField::zeros(grid), 1.0, 2.0), 0.0);
        let one = ComplexField::from_fn(grid, |_| Complex64::new(1.0, 0.0));
        assert!((weighted_norm(&one, 0.0, 0.0) - 20.0).abs() < 1e-12);
        let g = ComplexField::from_fn(grid, |x| Complex64::new((-(x[0] * x[0] + x[1] * x[1])).exp(), 0.0));
        let expected = (std::f64::consts::PI / 2.0).sqrt();
        assert!((weighted_norm(&g, 0.0, 0.0) - expected).abs() < 1e-6);
    }

    #[test]
    fn sobolev_matches_bessel_route() {
        let grid = Grid::new(2, 4.0, 32).unwrap();
        let f = random_field(grid, 11);
        let a = sobolev_norm(&f, 1.5);
        let b = weighted_norm(&f, 1.5, 0.0);
        assert!((a - b).abs() < 1e-11 * a);
    }

    #[test]
    fn derivative_of_plane_wave() {
        let grid = Grid::new(2, 5.0, 32).unwrap();
        let w = ComplexField::plane_wave(grid, &[3, 0]).unwrap();
        let d = w.derivative(0);
        let k = 3.0 * std::f64::consts::PI / 5.0;
        assert!(d.sub(&w.scale(Complex64::new(0.0, k))).l2_norm() < 1e-11);
    }
}
