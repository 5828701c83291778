//! Smooth transitions built from ψ(t) = e^{−1/t}.

#[inline]
fn psi(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

#[inline]
fn psi_prime(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        psi(t) / (t * t)
    }
}

/// C^∞ step: 0 for t ≤ 0, 1 for t ≥ 1, strictly increasing in between.
#[inline]
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = psi(t);
    a / (a + psi(1.0 - t))
}

#[inline]
pub fn smooth_step_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let a = psi(t);
    let b = psi(1.0 - t);
    (psi_prime(t) * b + a * psi_prime(1.0 - t)) / ((a + b) * (a + b))
}

/// Frequency cutoff χ: 0 below 1, 1 above 2.
#[inline]
pub fn cutoff_chi(r: f64) -> f64 {
    smooth_step(r - 1.0)
}

/// Spatial cutoff θ: 1 on [0,1], 0 beyond 2.
#[inline]
pub fn theta(r: f64) -> f64 {
    1.0 - smooth_step(r - 1.0)
}

#[inline]
pub fn theta_derivative(r: f64) -> f64 {
    -smooth_step_derivative(r - 1.0)
}
