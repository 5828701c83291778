//! Small dense matrices (n ≤ 3) used pointwise in coefficient and ray kernels.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::grid::MAX_DIM;

/// Real n×n matrix stored in a fixed 3×3 block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallMatrix {
    n: usize,
    m: [[f64; MAX_DIM]; MAX_DIM],
}

impl SmallMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&n), "dimension {n} out of range");
        Self { n, m: [[0.0; MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&[1.0; MAX_DIM][..n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut out = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            out.m[i][i] = v;
        }
        out
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut out = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix must be square");
            out.m[i][..n].copy_from_slice(row);
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.m[i][j] = v;
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.m[i][j] += other.m[i][j];
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-1.0))
    }

    /// Adds `s` to every diagonal entry.
    pub fn shift_diagonal(&self, s: f64) -> Self {
        let mut out = *self;
        for i in 0..self.n {
            out.m[i][i] += s;
        }
        out
    }

    #[inline]
    pub fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for j in 0..self.n {
                acc += self.m[i][j] * v[j];
            }
            out[i] = acc;
        }
    }

    /// ⟨M v, v⟩.
    #[inline]
    pub fn quadratic(&self, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                acc += self.m[i][j] * v[i] * v[j];
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                best = best.max(self.m[i][j].abs());
            }
        }
        best
    }

    pub fn frobenius(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                acc += self.m[i][j] * self.m[i][j];
            }
        }
        acc.sqrt()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.m[i][j] - self.m[j][i]).abs() <= tol))
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.m[i][j])
    }

    /// Eigenvalues (ascending) and eigenvectors (columns) of the symmetric part.
    pub fn symmetric_eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let a = self.to_dmatrix();
        let sym = (&a + a.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(self.n, self.n, |r, c| eig.eigenvectors[(r, order[c])]);
        (values, vectors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_form_matches_product() {
        let m = SmallMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, -3.0]]);
        let v = [0.5, 2.0];
        let mut mv = [0.0; 2];
        m.mul_vec(&v, &mut mv);
        assert!((m.quadratic(&v) - (mv[0] * v[0] + mv[1] * v[1])).abs() < 1e-15);
    }

    #[test]
    fn eigenvalues_sorted() {
        let m = SmallMatrix::diagonal(&[3.0, -1.0, 2.0]);
        let (vals, _) = m.symmetric_eigen();
        assert_eq!(vals, vec![-1.0, 2.0, 3.0]);
    }
}
