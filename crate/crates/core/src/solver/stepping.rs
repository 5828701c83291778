use num_complex::Complex64;

use super::Scheme;
use crate::error::Result;
use crate::field::ComplexField;

/// Exact Fourier multiplier e^{−ε|ξ|⁴dt}.
pub fn viscosity_semigroup(field: &ComplexField, epsilon: f64, dt: f64) -> ComplexField {
    if epsilon == 0.0 || dt == 0.0 {
        return field.clone();
    }
    field.apply_multiplier(|_, xi| {
        let k2: f64 = xi.iter().map(|c| c * c).sum();
        Complex64::new((-epsilon * k2 * k2 * dt).exp(), 0.0)
    })
}

fn axpy(u: &ComplexField, a: f64, k: &ComplexField) -> ComplexField {
    u.zip_with(k, |x, y| x + y * a)
}

/// One step of `scheme` for u' = −εΔ²u + N(t, u); `rhs` evaluates N.
pub(crate) fn step(
    scheme: Scheme,
    epsilon: f64,
    t: f64,
    dt: f64,
    u: &ComplexField,
    rhs: &mut dyn FnMut(f64, &ComplexField) -> Result<ComplexField>,
) -> Result<ComplexField> {
    match scheme {
        Scheme::ImexRk2 => {
            let u1 = viscosity_semigroup(u, epsilon, dt / 2.0);
            let k1 = rhs(t, &u1)?;
            let pred = axpy(&u1, dt, &k1);
            let k2 = rhs(t + dt, &pred)?;
            let u2 = u1.zip_with(&k1.add(&k2), |x, y| x + y * (dt / 2.0));
            Ok(viscosity_semigroup(&u2, epsilon, dt / 2.0))
        }
        Scheme::ExponentialLawson => {
            let k1 = rhs(t, u)?;
            let pred = viscosity_semigroup(&axpy(u, dt, &k1), epsilon, dt);
            let k2 = rhs(t + dt, &pred)?;
            let base = viscosity_semigroup(&axpy(u, dt / 2.0, &k1), epsilon, dt);
            Ok(axpy(&base, dt / 2.0, &k2))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn viscosity_trivial_cases() {
        let g = Grid::new(2, 5.0, 16).unwrap();
        let u = ComplexField::from_fn(g, |x| Complex64::new(x[0].sin(), x[1].cos()));
        assert_eq!(viscosity_semigroup(&u, 0.0, 0.3).values(), u.values());
        let w = ComplexField::plane_wave(g, &[2, -1]).unwrap();
        let xi2 = (std::f64::consts::PI / 5.0).powi(2) * 5.0;
        let out = viscosity_semigroup(&w, 0.1, 0.3);
        let expected = w.scale(Complex64::new((-0.1 * xi2 * xi2 * 0.3).exp(), 0.0));
        assert!(out.sub(&expected).max_abs() < 1e-13);
        assert!(viscosity_semigroup(&u, 0.1, 0.3).l2_norm() <= u.l2_norm());
    }

    #[test]
    fn schemes_are_second_order_on_a_scalar_mode() {
        // u' = −εk⁴u + iλu on a single plane wave.
        let g = Grid::new(1, 5.0, 16).unwrap();
        let w = ComplexField::plane_wave(g, &[1]).unwrap();
        let xi = std::f64::consts::PI / 5.0;
        let (eps, lam) = (0.3, 1.7);
        for scheme in [Scheme::ImexRk2, Scheme::ExponentialLawson] {
            let mut errs = Vec::new();
            for steps in [20, 40] {
                let dt = 1.0 / steps as f64;
                let mut u = w.clone();
                let mut rhs = |_: f64, v: &ComplexField| Ok(v.scale(Complex64::new(0.0, lam)));
                for k in 0..steps {
                    u = step(scheme, eps, k as f64 * dt, dt, &u, &mut rhs).unwrap();
                }
                let target = w.scale(Complex64::new(-eps * xi.powi(4), lam).exp());
                errs.push(u.sub(&target).l2_norm());
            }
            let order = (errs[0] / errs[1]).log2();
            assert!(order > 1.9, "{scheme:?}: {order}");
        }
    }
}
