//! Signature matrices and the periodic box discretization.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::linalg::SmallMatrix;

pub const MAX_DIM: usize = 3;

/// Inertia (k positive, n − k negative) of the constant principal matrix A_h.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Signature {
    n: usize,
    k: usize,
}

impl Signature {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&n) {
            return Err(config(format!("dimension n = {n} must lie in 1..={MAX_DIM}")));
        }
        if !(1..=n).contains(&k) {
            return Err(config(format!("k = {k} must satisfy 1 <= k <= n = {n}")));
        }
        Ok(Self { n, k })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn positive(&self) -> usize {
        self.k
    }

    pub fn is_elliptic(&self) -> bool {
        self.k == self.n
    }

    #[inline]
    pub fn sign(&self, j: usize) -> f64 {
        if j < self.k {
            1.0
        } else {
            -1.0
        }
    }

    #[inline]
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        for j in 0..self.n {
            out[j] = self.sign(j) * v[j];
        }
    }

    /// h⁰₂(ξ) = ⟨A_h ξ, ξ⟩.
    #[inline]
    pub fn quadratic(&self, xi: &[f64]) -> f64 {
        (0..self.n).map(|j| self.sign(j) * xi[j] * xi[j]).sum()
    }

    pub fn matrix(&self) -> SmallMatrix {
        let d: Vec<f64> = (0..self.n).map(|j| self.sign(j)).collect();
        SmallMatrix::diagonal(&d)
    }

    /// Validates a deserialized value.
    pub fn validated(self) -> Result<Self> {
        Self::new(self.n, self.k)
    }
}

/// Uniform periodic grid on [−L, L)ⁿ with M points per axis, row-major (last axis fastest).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    points: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(config(format!("grid dimension {dim} must lie in 1..={MAX_DIM}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(config(format!("box half-width {half_width} must be positive")));
        }
        if points < 4 || !points.is_power_of_two() {
            return Err(config(format!("points per axis {points} must be a power of two >= 4")));
        }
        Ok(Self { dim, half_width, points })
    }

    pub fn validated(self) -> Result<Self> {
        Self::new(self.dim, self.half_width, self.points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn box_measure(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    /// Radius beyond which every coefficient model is exactly flat.
    pub fn flat_radius(&self) -> f64 {
        0.9 * self.half_width
    }

    #[inline]
    pub fn coordinate(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    #[inline]
    pub fn multi_index(&self, idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        let mut rem = idx;
        for d in (0..self.dim).rev() {
            out[d] = rem % self.points;
            rem /= self.points;
        }
        out
    }

    #[inline]
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi[..self.dim].iter().fold(0, |acc, &j| acc * self.points + j)
    }

    #[inline]
    pub fn position(&self, idx: usize, out: &mut [f64]) {
        let mi = self.multi_index(idx);
        for d in 0..self.dim {
            out[d] = self.coordinate(mi[d]);
        }
    }

    /// Signed integer wavenumber of FFT slot j, in [−M/2, M/2).
    #[inline]
    pub fn wavenumber(&self, j: usize) -> i64 {
        let m = self.points as i64;
        let j = j as i64;
        if j < m / 2 {
            j
        } else {
            j - m
        }
    }

    #[inline]
    pub fn frequency_1d(&self, j: usize) -> f64 {
        PI / self.half_width * self.wavenumber(j) as f64
    }

    #[inline]
    pub fn frequency(&self, idx: usize, out: &mut [f64]) {
        let mi = self.multi_index(idx);
        for d in 0..self.dim {
            out[d] = self.frequency_1d(mi[d]);
        }
    }

    /// True when some axis of the lattice slot sits on the unpaired Nyquist wavenumber −M/2.
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let mi = self.multi_index(idx);
        (0..self.dim).any(|d| mi[d] == self.points / 2)
    }

    /// πM/(2L), the largest resolved frequency magnitude per axis.
    pub fn max_frequency(&self) -> f64 {
        PI * self.points as f64 / (2.0 * self.half_width)
    }

    /// Lattice slot holding the frequency with the given signed wavenumbers.
    pub fn slot_of_wavenumbers(&self, k: &[i64]) -> Result<usize> {
        let m = self.points as i64;
        let mut multi = [0usize; MAX_DIM];
        for d in 0..self.dim {
            if k[d] < -m / 2 || k[d] >= m / 2 {
                return Err(config(format!("wavenumber {} outside lattice", k[d])));
            }
            multi[d] = k[d].rem_euclid(m) as usize;
        }
        Ok(self.flat_index(&multi))
    }

    /// All grid positions, flattened as `len × dim`.
    pub fn positions(&self) -> Vec<[f64; MAX_DIM]> {
        (0..self.len())
            .map(|i| {
                let mut p = [0.0; MAX_DIM];
                self.position(i, &mut p);
                p
            })
            .collect()
    }

    /// All lattice frequencies in FFT slot order.
    pub fn frequencies(&self) -> Vec<[f64; MAX_DIM]> {
        (0..self.len())
            .map(|i| {
                let mut p = [0.0; MAX_DIM];
                self.frequency(i, &mut p);
                p
            })
            .collect()
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.dim == other.dim && self.points == other.points && self.half_width == other.half_width
    }
}

#[inline]
pub fn japanese(v: &[f64]) -> f64 {
    (1.0 + v.iter().map(|c| c * c).sum::<f64>()).sqrt()
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
