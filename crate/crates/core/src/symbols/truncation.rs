use crate::coefficients::{CoefficientModel, StateSample};
use crate::cutoff::{theta, theta_derivative};
use crate::error::{config, Result};
use crate::grid::{norm, MAX_DIM};
use crate::linalg::SmallMatrix;
use crate::rays::Metric;

/// The principal part truncated at radius R:
/// a_R(x) = θ(|x|/R)a(x, 0) + (1 − θ(|x|/R))A_h, so a_R = a(·, 0) on |x| ≤ R and a_R = A_h on |x| ≥ 2R.
#[derive(Clone, Debug)]
pub struct TruncatedOperator {
    model: CoefficientModel,
    radius: f64,
}

/// Fails when the truncation annulus would reach beyond the model's flat radius.
pub fn truncate(model: &CoefficientModel, radius: f64) -> Result<TruncatedOperator> {
    if !(radius > 0.0) {
        return Err(config(format!("truncation radius {radius} must be positive")));
    }
    if 2.0 * radius > model.flat_radius() * (1.0 + 1e-12) {
        return Err(config(format!(
            "truncation radius {radius}: 2R exceeds the flat radius {}",
            model.flat_radius()
        )));
    }
    Ok(TruncatedOperator { model: model.clone(), radius })
}

impl TruncatedOperator {
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn model(&self) -> &CoefficientModel {
        &self.model
    }

    fn weight(&self, x: &[f64]) -> f64 {
        theta(norm(&x[..self.model.dim()]) / self.radius)
    }

    pub fn a_r(&self, x: &[f64]) -> SmallMatrix {
        let base = self.model.signature().matrix();
        let w = self.weight(x);
        if w == 0.0 {
            return base;
        }
        let a = self.model.a(x, 0.0, &StateSample::ZERO);
        base.add(&a.sub(&base).scaled(w))
    }

    /// Coefficient (1 − θ(|x|/R))(a(x, 0) − A_h) of the remainder ℰ^R = ∂_j(· ∂_k).
    pub fn remainder(&self, x: &[f64]) -> SmallMatrix {
        let base = self.model.signature().matrix();
        let a = self.model.a(x, 0.0, &StateSample::ZERO);
        a.sub(&base).scaled(1.0 - self.weight(x))
    }

    /// ∂_{x_j} a_R, including the derivative of the cutoff.
    pub fn a_r_gradient(&self, x: &[f64]) -> [SmallMatrix; MAX_DIM] {
        let n = self.model.dim();
        let r = norm(&x[..n]);
        let w = theta(r / self.radius);
        let dw = theta_derivative(r / self.radius) / self.radius;
        let mut out = [SmallMatrix::zeros(n); MAX_DIM];
        if w == 0.0 && dw == 0.0 {
            return out;
        }
        let da = self.model.a_gradient(x, 0.0, &StateSample::ZERO);
        let diff = self.model.a(x, 0.0, &StateSample::ZERO).sub(&self.model.signature().matrix());
        for d in 0..n {
            let radial = if r > 0.0 { dw * x[d] / r } else { 0.0 };
            out[d] = da[d].scaled(w).add(&diff.scaled(radial));
        }
        out
    }
}

impl Metric for TruncatedOperator {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn matrix(&self, x: &[f64]) -> SmallMatrix {
        self.a_r(x)
    }

    fn gradient(&self, x: &[f64]) -> [SmallMatrix; MAX_DIM] {
        self.a_r_gradient(x)
    }

    fn flat_radius(&self) -> f64 {
        (2.0 * self.radius).min(self.model.flat_radius())
    }
}
