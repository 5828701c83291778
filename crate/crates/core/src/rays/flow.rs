//! Hamiltonian vector field of h(x, ξ) = ⟨a(x)ξ, ξ⟩ and the adaptive Dormand–Prince integrator.

use num_complex::Complex64;

use crate::coefficients::{CoefficientModel, StateSample};
use crate::grid::MAX_DIM;
use crate::linalg::SmallMatrix;

/// A position-dependent symmetric matrix field driving the flow.
pub trait Metric: Sync {
    fn dim(&self) -> usize;
    fn matrix(&self, x: &[f64]) -> SmallMatrix;
    fn gradient(&self, x: &[f64]) -> [SmallMatrix; MAX_DIM];
    /// Radius beyond which the matrix is constant, so rays are straight lines.
    fn flat_radius(&self) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DerivativeMode {
    Analytic,
    /// Central differences with the given step.
    FiniteDifference(f64),
}

/// The principal matrix a(·, t, z = 0) of a model at a frozen time.
#[derive(Clone, Copy, Debug)]
pub struct FrozenMetric<'a> {
    pub model: &'a CoefficientModel,
    pub t: f64,
    pub derivative: DerivativeMode,
}

impl<'a> FrozenMetric<'a> {
    pub fn new(model: &'a CoefficientModel, t: f64) -> Self {
        Self { model, t, derivative: DerivativeMode::Analytic }
    }
}

impl Metric for FrozenMetric<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn matrix(&self, x: &[f64]) -> SmallMatrix {
        self.model.a(x, self.t, &StateSample::ZERO)
    }

    fn gradient(&self, x: &[f64]) -> [SmallMatrix; MAX_DIM] {
        match self.derivative {
            DerivativeMode::Analytic => self.model.a_gradient(x, self.t, &StateSample::ZERO),
            DerivativeMode::FiniteDifference(h) => self.model.a_gradient_fd(x, self.t, &StateSample::ZERO, h),
        }
    }

    fn flat_radius(&self) -> f64 {
        self.model.flat_radius()
    }
}

/// ẋ = 2aξ, ξ̇_j = −⟨∂_j a ξ, ξ⟩.
#[inline]
pub fn vector_field<M: Metric + ?Sized>(metric: &M, x: &[f64], xi: &[f64], dx: &mut [f64], dxi: &mut [f64]) {
    let n = metric.dim();
    let a = metric.matrix(x);
    a.mul_vec(xi, dx);
    for v in dx[..n].iter_mut() {
        *v *= 2.0;
    }
    if metric.flat_radius() <= crate::grid::norm(&x[..n]) {
        dxi[..n].fill(0.0);
        return;
    }
    let g = metric.gradient(x);
    for j in 0..n {
        dxi[j] = -g[j].quadratic(xi);
    }
}

pub type Integrand<'a> = &'a (dyn Fn(&[f64], &[f64]) -> Complex64 + Sync);

pub(crate) const STATE: usize = 2 * MAX_DIM + 2;

#[derive(Clone, Copy, Debug)]
pub struct FlowOptions {
    /// Relative and absolute local error tolerance.
    pub tol: f64,
    /// Largest spatial displacement allowed in one step.
    pub max_displacement: f64,
    pub max_steps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_displacement: 1.0, max_steps: 5_000_000 }
    }
}

/// Position along a ray: parameter s, phase point, and (optionally) ∫ integrand ds.
#[derive(Clone, Copy, Debug)]
pub struct RayState {
    pub s: f64,
    pub(crate) y: [f64; STATE],
    pub(crate) h: f64,
    pub(crate) h_max: f64,
    pub(crate) steps: usize,
    k1: Option<[f64; STATE]>,
}

impl RayState {
    pub fn x(&self, n: usize) -> &[f64] {
        &self.y[..n]
    }

    pub fn xi(&self, n: usize) -> &[f64] {
        &self.y[n..2 * n]
    }

    pub fn integral(&self, n: usize) -> Complex64 {
        Complex64::new(self.y[2 * n], self.y[2 * n + 1])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Advance {
    Reached,
    Stopped,
    StepFailure(String),
}

pub struct Flow<'a, M: Metric + ?Sized> {
    metric: &'a M,
    integrand: Option<Integrand<'a>>,
    opts: FlowOptions,
    n: usize,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

impl<'a, M: Metric + ?Sized> Flow<'a, M> {
    pub fn new(metric: &'a M, integrand: Option<Integrand<'a>>, opts: FlowOptions) -> Self {
        let n = metric.dim();
        Self { metric, integrand, opts, n }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn width(&self) -> usize {
        if self.integrand.is_some() {
            2 * self.n + 2
        } else {
            2 * self.n
        }
    }

    fn rhs(&self, y: &[f64; STATE], out: &mut [f64; STATE]) {
        let n = self.n;
        let (x, rest) = y.split_at(n);
        let xi = &rest[..n];
        let (dx, drest) = out.split_at_mut(n);
        vector_field(self.metric, x, xi, dx, &mut drest[..n]);
        if let Some(f) = self.integrand {
            let v = f(x, xi);
            out[2 * n] = v.re;
            out[2 * n + 1] = v.im;
        }
    }

    pub fn start(&self, x: &[f64], xi: &[f64]) -> RayState {
        let n = self.n;
        let mut y = [0.0; STATE];
        y[..n].copy_from_slice(&x[..n]);
        y[n..2 * n].copy_from_slice(&xi[..n]);
        let mut f = [0.0; STATE];
        self.rhs(&y, &mut f);
        let speed = crate::grid::norm(&f[..n]).max(1e-300);
        let h_max = self.opts.max_displacement / speed;
        RayState { s: 0.0, y, h: (1e-2 / speed).min(h_max), h_max, steps: 0, k1: Some(f) }
    }

    pub fn hamiltonian(&self, st: &RayState) -> f64 {
        let n = self.n;
        self.metric.matrix(&st.y[..n]).quadratic(&st.y[n..2 * n])
    }

    /// Advances toward `s_target` (either direction). `stop` is checked after every accepted step;
    /// `on_step` sees every accepted state.
    pub fn advance(
        &self,
        st: &mut RayState,
        s_target: f64,
        stop: &mut dyn FnMut(&RayState) -> bool,
        on_step: &mut dyn FnMut(&RayState),
    ) -> Advance {
        let w = self.width();
        let dir = if s_target >= st.s { 1.0 } else { -1.0 };
        let tol = self.opts.tol;
        let mut k1 = match st.k1 {
            Some(k) => k,
            None => {
                let mut f = [0.0; STATE];
                self.rhs(&st.y, &mut f);
                f
            }
        };
        let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
            ([0.0; STATE], [0.0; STATE], [0.0; STATE], [0.0; STATE], [0.0; STATE], [0.0; STATE]);
        let mut tmp = [0.0; STATE];
        let mut ynew = [0.0; STATE];
        loop {
            let remaining = (s_target - st.s) * dir;
            if remaining <= 1e-14 * st.s.abs().max(1.0) {
                st.s = s_target;
                st.k1 = Some(k1);
                return Advance::Reached;
            }
            if st.steps >= self.opts.max_steps {
                st.k1 = Some(k1);
                return Advance::StepFailure("step budget exhausted".into());
            }
            let mut h = st.h.abs().min(st.h_max).min(remaining);
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            let hs = h * dir;
            for i in 0..w {
                tmp[i] = st.y[i] + hs * A21 * k1[i];
            }
            self.rhs(&tmp, &mut k2);
            for i in 0..w {
                tmp[i] = st.y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
            }
            self.rhs(&tmp, &mut k3);
            for i in 0..w {
                tmp[i] = st.y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            self.rhs(&tmp, &mut k4);
            for i in 0..w {
                tmp[i] = st.y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            self.rhs(&tmp, &mut k5);
            for i in 0..w {
                tmp[i] = st.y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            self.rhs(&tmp, &mut k6);
            for i in 0..w {
                ynew[i] = st.y[i] + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            self.rhs(&ynew, &mut k7);
            let mut err = 0.0;
            for i in 0..w {
                let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = tol + tol * st.y[i].abs().max(ynew[i].abs());
                err += (e / sc) * (e / sc);
            }
            let err = (err / w as f64).sqrt();
            if !err.is_finite() {
                st.h = h * 0.2;
                if st.h < 1e-13 * st.s.abs().max(1.0) {
                    st.k1 = Some(k1);
                    return Advance::StepFailure(format!("non-finite state at s = {}", st.s));
                }
                continue;
            }
            if err <= 1.0 {
                st.s = if last { s_target } else { st.s + hs };
                st.y = ynew;
                st.steps += 1;
                k1 = k7;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || fac < 1.0 {
                    st.h = h * fac;
                }
                on_step(st);
                if stop(st) {
                    st.k1 = Some(k1);
                    return Advance::Stopped;
                }
            } else {
                st.h = h * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                if st.h < 1e-13 * st.s.abs().max(1.0) {
                    st.k1 = Some(k1);
                    return Advance::StepFailure(format!("step size underflow at s = {}", st.s));
                }
            }
        }
    }
}
