//! Sampling checks of the structural hypotheses on a coefficient model, and the null-cone
//! proportionality test for a pair of symmetric matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientModel, StateSample};
use crate::error::{Error, Result};
use crate::grid::{japanese, MAX_DIM};
use crate::linalg::SmallMatrix;
use crate::sampling::Halton;

#[derive(Clone, Copy, Debug)]
pub struct HypothesisOptions {
    pub seed: u64,
    /// Time window [0, t_max] sampled for time-dependent models.
    pub t_max: f64,
}

impl Default for HypothesisOptions {
    fn default() -> Self {
        Self { seed: 1, t_max: 1.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// min over samples of min(σ_min(a), 1/σ_max(a)), at most 1.
    pub gamma_r0: f64,
    /// sup ⟨x⟩^N · max|a − A_h|.
    pub flatness_margin: f64,
    /// sup ⟨x⟩^N · max|∂_x a| (central differences).
    pub flatness_derivative_margin: f64,
    /// sup ⟨x⟩^N · max(|b₁|, |b₂|) componentwise.
    pub growth_margin: f64,
    /// sup ⟨x⟩^N · max(|∂_x b₁|, |∂_x b₂|).
    pub growth_derivative_margin: f64,
    pub samples: usize,
    pub worst_point: Vec<f64>,
    pub worst_time: f64,
    pub r0: f64,
}

struct Sample {
    x: [f64; MAX_DIM],
    t: f64,
    z: StateSample,
}

fn gamma_of(a: &SmallMatrix) -> (f64, f64) {
    let (vals, _) = a.symmetric_eigen();
    let smin = vals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let smax = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (smin.min(1.0 / smax).min(1.0), smin)
}

fn max_entry_abs(v: &[Complex64]) -> f64 {
    v.iter().fold(0.0f64, |m, c| m.max(c.norm()))
}

/// Samples (x, t, z) quasi-randomly in the box × [0, t_max] × {|z| ≤ r₀} and measures the
/// non-degeneracy constant and the weighted flatness and growth margins.
pub fn check_hypotheses(
    model: &CoefficientModel,
    r0: f64,
    sample_budget: usize,
    opts: &HypothesisOptions,
) -> Result<HypothesisReport> {
    if sample_budget < 1000 {
        return Err(Error::Precondition(format!("sample_budget {sample_budget} must be at least 1000")));
    }
    if !(r0 >= 0.0) {
        return Err(Error::Precondition("r0 must be nonnegative".into()));
    }
    let n = model.dim();
    let half = model.flat_radius() / 0.9;
    let quasi = model.is_quasilinear();
    let zdim = if quasi { 2 + 2 * n } else { 0 };
    let mut seq = Halton::new(n + 1 + zdim, opts.seed);
    let mut p = vec![0.0; n + 1 + zdim];
    let zscale = r0 / (2.0 * ((n + 1) as f64).sqrt());

    let mut samples = Vec::with_capacity(sample_budget);
    samples.push(Sample { x: [0.0; MAX_DIM], t: 0.0, z: StateSample::ZERO });
    if quasi && r0 > 0.0 {
        let mut z = StateSample::ZERO;
        z.u = Complex64::new(r0 / 2f64.sqrt(), 0.0);
        samples.push(Sample { x: [0.0; MAX_DIM], t: 0.0, z });
    }
    while samples.len() < sample_budget {
        seq.next_point(&mut p);
        let mut x = [0.0; MAX_DIM];
        for d in 0..n {
            x[d] = half * (2.0 * p[d] - 1.0);
        }
        let t = opts.t_max * p[n];
        let mut z = StateSample::ZERO;
        if quasi {
            let q = &p[n + 1..];
            z.u = Complex64::new(2.0 * q[0] - 1.0, 2.0 * q[1] - 1.0) * zscale;
            for d in 0..n {
                z.grad[d] = Complex64::new(2.0 * q[2 + 2 * d] - 1.0, 2.0 * q[3 + 2 * d] - 1.0) * zscale;
            }
        }
        samples.push(Sample { x, t, z });
    }

    let base = model.signature().matrix();
    let weight_exp = model.decay_exponent() as f64;
    let mut gamma = f64::INFINITY;
    let mut worst = 0usize;
    let (mut flat, mut dflat, mut grow, mut dgrow) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (i, s) in samples.iter().enumerate() {
        let x = &s.x[..n];
        let a = model.a(x, s.t, &s.z);
        let (g, smin) = gamma_of(&a);
        if !(smin > 1e-12) {
            return Err(Error::NonDegeneracy { point: x.to_vec(), t: s.t, sigma_min: smin });
        }
        if g < gamma {
            gamma = g;
            worst = i;
        }
        let w = japanese(x).powf(weight_exp);
        flat = flat.max(w * a.sub(&base).max_abs());
        let b1 = model.b1(x, s.t, &s.z);
        let b2 = model.b2(x, s.t, &s.z);
        grow = grow.max(w * max_entry_abs(&b1[..n]).max(max_entry_abs(&b2[..n])));

        let hfd = 1e-4 * (1.0 + crate::grid::norm(x));
        let da = model.a_gradient_fd(x, s.t, &s.z, hfd);
        let mut xp = s.x;
        let mut xm = s.x;
        for d in 0..n {
            dflat = dflat.max(w * da[d].max_abs());
            xp[d] += hfd;
            xm[d] -= hfd;
            let p1 = model.b1(&xp[..n], s.t, &s.z);
            let m1 = model.b1(&xm[..n], s.t, &s.z);
            let p2 = model.b2(&xp[..n], s.t, &s.z);
            let m2 = model.b2(&xm[..n], s.t, &s.z);
            for j in 0..n {
                let d1 = ((p1[j] - m1[j]) / (2.0 * hfd)).norm();
                let d2 = ((p2[j] - m2[j]) / (2.0 * hfd)).norm();
                dgrow = dgrow.max(w * d1.max(d2));
            }
            xp[d] = s.x[d];
            xm[d] = s.x[d];
        }
    }

    // Compass refinement of the worst non-degeneracy sample.
    let ws = &samples[worst];
    let mut best_x = ws.x;
    let mut step = half / (sample_budget as f64).powf(1.0 / n as f64);
    while step > 1e-9 * half {
        let mut improved = false;
        for d in 0..n {
            for sgn in [-1.0, 1.0] {
                let mut cand = best_x;
                cand[d] = (cand[d] + sgn * step).clamp(-half, half);
                let a = model.a(&cand[..n], ws.t, &ws.z);
                let (g, smin) = gamma_of(&a);
                if !(smin > 1e-12) {
                    return Err(Error::NonDegeneracy { point: cand[..n].to_vec(), t: ws.t, sigma_min: smin });
                }
                if g < gamma {
                    gamma = g;
                    best_x = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }

    Ok(HypothesisReport {
        gamma_r0: gamma,
        flatness_margin: flat,
        flatness_derivative_margin: dflat,
        growth_margin: grow,
        growth_derivative_margin: dgrow,
        samples: samples.len(),
        worst_point: best_x[..n].to_vec(),
        worst_time: ws.t,
        r0,
    })
}

/// Outcome of the null-cone proportionality test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proportionality {
    Proportional(Complex64),
    Witness(Vec<f64>),
}

fn bilinear(b: &DMatrix<Complex64>, xi: &[f64]) -> Complex64 {
    let n = xi.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += b[(i, j)] * (xi[i] * xi[j]);
        }
    }
    acc
}

fn quadratic(a: &DMatrix<f64>, xi: &[f64]) -> f64 {
    let n = xi.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * xi[i] * xi[j];
        }
    }
    acc
}

fn unit_combinations(idx: &[usize]) -> Vec<Vec<(usize, f64)>> {
    let mut out: Vec<Vec<(usize, f64)>> = idx.iter().map(|&i| vec![(i, 1.0)]).collect();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for (p, &i) in idx.iter().enumerate() {
        for &j in &idx[p + 1..] {
            out.push(vec![(i, r), (j, r)]);
            out.push(vec![(i, r), (j, -r)]);
        }
    }
    out
}

/// Decides whether a complex symmetric B is a multiple of a real symmetric, indefinite,
/// non-degenerate A, by testing ⟨Bξ,ξ⟩ on a finite null-cone set of A that is complete for
/// the question: ⟨Bξ,ξ⟩ vanishes on it iff B = λA.
pub fn proportionality_check(a: &DMatrix<f64>, b: &DMatrix<Complex64>, tol: f64) -> Result<Proportionality> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::Precondition("A and B must be square matrices of equal size".into()));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let pos: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 1e-12 * scale).collect();
    let neg: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] < -1e-12 * scale).collect();
    if pos.len() + neg.len() < n {
        return Err(Error::Precondition("A is degenerate".into()));
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Precondition("A is definite: its null cone is trivial".into()));
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let to_xi = |combo: &[(usize, f64)], xi: &mut [f64]| {
        for &(k, c) in combo {
            let s = c / eig.eigenvalues[k].abs().sqrt();
            for r in 0..n {
                xi[r] += s * eig.eigenvectors[(r, k)];
            }
        }
    };
    for u in unit_combinations(&pos) {
        for w in unit_combinations(&neg) {
            for sign in [1.0, -1.0] {
                let mut xi = vec![0.0; n];
                to_xi(&u, &mut xi);
                let w_signed: Vec<(usize, f64)> = w.iter().map(|&(k, c)| (k, sign * c)).collect();
                to_xi(&w_signed, &mut xi);
                let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                xi.iter_mut().for_each(|v| *v /= norm);
                let val = bilinear(b, &xi).norm();
                if best.as_ref().is_none_or(|(m, _)| val > *m) {
                    best = Some((val, xi));
                }
            }
        }
    }
    let (val, xi) = best.expect("null cone candidates exist");
    if val > tol && quadratic(&sym, &xi).abs() <= tol {
        return Ok(Proportionality::Witness(xi));
    }
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0;
    for i in 0..n {
        for j in 0..n {
            num += b[(i, j)] * sym[(i, j)];
            den += sym[(i, j)] * sym[(i, j)];
        }
    }
    Ok(Proportionality::Proportional(num / den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{ModelSpec, PrincipalSpec, VectorSpec};
    use crate::grid::Signature;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn flat_model_is_exact() {
        let m = ModelSpec::flat(Signature::new(2, 1).unwrap()).build(20.0).unwrap();
        let r = check_hypotheses(&m, 1.0, 1000, &HypothesisOptions::default()).unwrap();
        assert_eq!(r.gamma_r0, 1.0);
        assert_eq!(r.flatness_margin, 0.0);
        assert_eq!(r.growth_margin, 0.0);
    }

    #[test]
    fn gaussian_bump_gamma() {
        let spec = ModelSpec::new(
            Signature::new(2, 1).unwrap(),
            PrincipalSpec::GaussianBump { amplitude: 0.5, width: 1.0, time_drift: 0.0 },
        );
        let m = spec.build(20.0).unwrap();
        let r = check_hypotheses(&m, 1.0, 2000, &HypothesisOptions::default()).unwrap();
        assert!((r.gamma_r0 - 0.5).abs() < 1e-9, "{}", r.gamma_r0);
    }

    #[test]
    fn rational_b1_growth_margin() {
        let spec = ModelSpec::flat(Signature::new(2, 1).unwrap()).with_b1(VectorSpec::rational(8.0, vec![1.0, 0.0], vec![]));
        let m = spec.build(20.0).unwrap();
        let r = check_hypotheses(&m, 1.0, 4000, &HypothesisOptions::default()).unwrap();
        assert!(r.growth_margin <= 1.0 + 1e-12);
        assert!(r.growth_margin > 0.99);
    }

    #[test]
    fn singular_matrix_named() {
        let spec = ModelSpec::new(
            Signature::new(2, 1).unwrap(),
            PrincipalSpec::GaussianBump { amplitude: 1.0, width: 1.0, time_drift: 0.0 },
        );
        let m = spec.build(20.0).unwrap();
        match check_hypotheses(&m, 1.0, 1000, &HypothesisOptions::default()) {
            Err(Error::NonDegeneracy { point, .. }) => assert!(point.iter().all(|v| v.abs() < 1e-9)),
            other => panic!("expected non-degeneracy error, got {other:?}"),
        }
    }

    #[test]
    fn budget_precondition() {
        let m = ModelSpec::flat(Signature::new(2, 1).unwrap()).build(20.0).unwrap();
        assert!(check_hypotheses(&m, 1.0, 10, &HypothesisOptions::default()).is_err());
    }

    #[test]
    fn proportionality_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = a.map(|v| c(0.0, 3.0 * v));
        assert_eq!(proportionality_check(&a, &b, 1e-10).unwrap(), Proportionality::Proportional(c(0.0, 3.0)));
        let zero = DMatrix::from_element(2, 2, c(0.0, 0.0));
        assert_eq!(proportionality_check(&a, &zero, 1e-10).unwrap(), Proportionality::Proportional(c(0.0, 0.0)));
        let id = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        match proportionality_check(&a, &id, 1e-10).unwrap() {
            Proportionality::Witness(xi) => {
                assert!((xi[0].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
                assert!((xi[0].abs() - xi[1].abs()).abs() < 1e-12);
                assert!((bilinear(&id, &xi) - c(1.0, 0.0)).norm() < 1e-12);
            }
            other => panic!("expected witness, got {other:?}"),
        }
    }

    #[test]
    fn definite_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let b = DMatrix::from_element(2, 2, c(1.0, 0.0));
        assert!(matches!(proportionality_check(&a, &b, 1e-10), Err(Error::Precondition(_))));
    }
}
