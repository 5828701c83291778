//! Closed-form coefficient families for L u = −i∂_j(a_{jk}∂_k u) + b₁·∇u + b₂·∇ū + c₁u + c₂ū + f.
//!
//! Every perturbation of the flat data (A_h, 0, 0, 0, 0, 0) is multiplied by a taper that equals 1
//! for |x| ≤ 0.75·r_f and vanishes for |x| ≥ r_f, where r_f = 0.9·L is the flat radius of the box.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::cutoff::{smooth_step, smooth_step_derivative};
use crate::error::{config, Result};
use crate::grid::{Signature, MAX_DIM};
use crate::linalg::SmallMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Pointwise state argument z = (u, ū, ∇u, ∇ū); conjugates are implied.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StateSample {
    pub u: Complex64,
    pub grad: [Complex64; MAX_DIM],
}

impl StateSample {
    pub const ZERO: StateSample = StateSample { u: ZERO, grad: [ZERO; MAX_DIM] };

    /// Euclidean norm of z ∈ ℂ^{2n+2}.
    pub fn magnitude(&self) -> f64 {
        (2.0 * (self.u.norm_sqr() + self.grad.iter().map(|g| g.norm_sqr()).sum::<f64>())).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum PrincipalSpec {
    /// a ≡ A_h.
    Flat {},
    /// a = A_h + ρ(1 + κt)e^{−|x|²/w²}·I.
    GaussianBump {
        amplitude: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default)]
        time_drift: f64,
    },
    /// a = A_h + ρ⟨x⟩^{−N}·I.
    RationalDecay { amplitude: f64, exponent: f64 },
    /// a = A_h − d·e^{−(|x|−r₀)²/w²}·I; with A_h = I this is a refracting ring.
    RingWell {
        #[serde(default = "ring_depth")]
        depth: f64,
        #[serde(default = "ring_radius")]
        radius: f64,
        #[serde(default = "one")]
        width: f64,
    },
    /// a = A_h + α(|u|² + |∇u|²)·I, b₁ += β|u|²e₁, c₁ += γ|u|².
    QuasilinearCubic {
        alpha: f64,
        #[serde(default)]
        beta: [f64; 2],
        #[serde(default)]
        gamma: [f64; 2],
    },
}

fn one() -> f64 {
    1.0
}
fn ring_depth() -> f64 {
    0.9
}
fn ring_radius() -> f64 {
    3.0
}
fn default_decay() -> u32 {
    8
}
fn default_budget() -> u32 {
    2
}

/// Spatial profile shared by vector and scalar lower-order coefficients.
#[derive(Clone, Debug, PartialEq)]
pub enum ProfileSpec {
    /// e^{−|x−c|²/w²}.
    Gaussian { width: f64, center: Vec<f64> },
    /// ⟨x⟩^{−N}.
    Rational { exponent: f64 },
}

/// Complex vector amplitude (re + i·im) times a spatial profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorSpec {
    Gaussian {
        #[serde(default = "one")]
        width: f64,
        #[serde(default)]
        center: Vec<f64>,
        re: Vec<f64>,
        #[serde(default)]
        im: Vec<f64>,
    },
    Rational {
        exponent: f64,
        re: Vec<f64>,
        #[serde(default)]
        im: Vec<f64>,
    },
}

impl VectorSpec {
    pub fn gaussian(width: f64, re: Vec<f64>, im: Vec<f64>) -> Self {
        VectorSpec::Gaussian { width, center: vec![], re, im }
    }

    pub fn rational(exponent: f64, re: Vec<f64>, im: Vec<f64>) -> Self {
        VectorSpec::Rational { exponent, re, im }
    }

    fn parts(&self) -> (ProfileSpec, &[f64], &[f64]) {
        match self {
            VectorSpec::Gaussian { width, center, re, im } => {
                (ProfileSpec::Gaussian { width: *width, center: center.clone() }, re, im)
            }
            VectorSpec::Rational { exponent, re, im } => (ProfileSpec::Rational { exponent: *exponent }, re, im),
        }
    }

    /// Same profile with the amplitude multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mul = |v: &Vec<f64>| v.iter().map(|c| c * s).collect::<Vec<_>>();
        match self {
            VectorSpec::Gaussian { width, center, re, im } => {
                VectorSpec::Gaussian { width: *width, center: center.clone(), re: mul(re), im: mul(im) }
            }
            VectorSpec::Rational { exponent, re, im } => {
                VectorSpec::Rational { exponent: *exponent, re: mul(re), im: mul(im) }
            }
        }
    }
}

/// Complex scalar amplitude times a spatial profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarSpec {
    Gaussian {
        #[serde(default = "one")]
        width: f64,
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default)]
        re: f64,
        #[serde(default)]
        im: f64,
    },
    Rational {
        exponent: f64,
        #[serde(default)]
        re: f64,
        #[serde(default)]
        im: f64,
    },
}

impl ScalarSpec {
    fn parts(&self) -> (ProfileSpec, Complex64) {
        match self {
            ScalarSpec::Gaussian { width, center, re, im } => {
                (ProfileSpec::Gaussian { width: *width, center: center.clone() }, Complex64::new(*re, *im))
            }
            ScalarSpec::Rational { exponent, re, im } => {
                (ProfileSpec::Rational { exponent: *exponent }, Complex64::new(*re, *im))
            }
        }
    }
}

/// Gaussian pulse f = A e^{−|x−c|²/w²} e^{iωt}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSpec {
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    #[serde(default = "one")]
    pub width: f64,
    #[serde(default)]
    pub center: Vec<f64>,
    #[serde(default)]
    pub omega: f64,
}

/// Serializable description of a coefficient model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub signature: Signature,
    pub family: PrincipalSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b1: Option<VectorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b2: Option<VectorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<ScalarSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<ScalarSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<ForcingSpec>,
    #[serde(default = "default_decay")]
    pub decay_exponent: u32,
    #[serde(default = "default_budget")]
    pub derivative_budget: u32,
}

impl ModelSpec {
    pub fn new(signature: Signature, family: PrincipalSpec) -> Self {
        Self {
            signature,
            family,
            b1: None,
            b2: None,
            c1: None,
            c2: None,
            forcing: None,
            decay_exponent: default_decay(),
            derivative_budget: default_budget(),
        }
    }

    pub fn flat(signature: Signature) -> Self {
        Self::new(signature, PrincipalSpec::Flat {})
    }

    pub fn with_b1(mut self, b1: VectorSpec) -> Self {
        self.b1 = Some(b1);
        self
    }

    pub fn with_b2(mut self, b2: VectorSpec) -> Self {
        self.b2 = Some(b2);
        self
    }

    pub fn with_c1(mut self, c1: ScalarSpec) -> Self {
        self.c1 = Some(c1);
        self
    }

    pub fn with_c2(mut self, c2: ScalarSpec) -> Self {
        self.c2 = Some(c2);
        self
    }

    pub fn with_forcing(mut self, f: ForcingSpec) -> Self {
        self.forcing = Some(f);
        self
    }

    /// Builds the evaluable model for a box of half-width `half_width`.
    pub fn build(&self, half_width: f64) -> Result<CoefficientModel> {
        CoefficientModel::new(self.clone(), 0.9 * half_width)
    }
}

#[derive(Clone, Debug)]
enum Profile {
    Gaussian { width: f64, center: [f64; MAX_DIM] },
    Rational { exponent: f64 },
}

impl Profile {
    fn from_spec(spec: &ProfileSpec, n: usize) -> Result<Self> {
        match spec {
            ProfileSpec::Gaussian { width, center } => {
                if !(*width > 0.0) {
                    return Err(config("profile width must be positive"));
                }
                Ok(Profile::Gaussian { width: *width, center: pad(center, n, "center")? })
            }
            ProfileSpec::Rational { exponent } => {
                if !(*exponent > 1.0) {
                    return Err(config("rational profile exponent must exceed 1"));
                }
                Ok(Profile::Rational { exponent: *exponent })
            }
        }
    }

    #[inline]
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Profile::Gaussian { width, center } => {
                let d2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                (-d2 / (width * width)).exp()
            }
            Profile::Rational { exponent } => {
                let r2: f64 = x.iter().map(|a| a * a).sum();
                (1.0 + r2).powf(-exponent / 2.0)
            }
        }
    }

    /// Bound on ∫₀^∞ profile(X(τ)) dτ along a straight outgoing line X(τ) with speed v, started at
    /// |X(0)| = ρ with X(0)·Ẋ ≥ 0, so that |X(τ)|² ≥ ρ² + v²τ².
    fn outgoing_line_integral_bound(&self, rho: f64, v: f64) -> f64 {
        match self {
            Profile::Rational { exponent } => {
                let c = (1.0 + rho * rho).sqrt();
                let ratio = (ln_gamma((exponent - 1.0) / 2.0) - ln_gamma(exponent / 2.0)).exp();
                c.powf(1.0 - exponent) * PI.sqrt() * ratio / (2.0 * v)
            }
            Profile::Gaussian { width, center } => {
                let c = center.iter().map(|a| a * a).sum::<f64>().sqrt();
                let lower = rho / 2f64.sqrt() - c;
                if lower <= 0.0 {
                    return f64::INFINITY;
                }
                2f64.sqrt() / v * width * PI.sqrt() / 2.0 * erfc(lower / width)
            }
        }
    }
}

fn pad(v: &[f64], n: usize, what: &str) -> Result<[f64; MAX_DIM]> {
    if !v.is_empty() && v.len() != n {
        return Err(config(format!("{what} has {} components, expected {n}", v.len())));
    }
    let mut out = [0.0; MAX_DIM];
    out[..v.len()].copy_from_slice(v);
    Ok(out)
}

#[derive(Clone, Debug)]
struct VectorField {
    amp: [Complex64; MAX_DIM],
    profile: Profile,
}

impl VectorField {
    fn from_spec(spec: &VectorSpec, n: usize) -> Result<Self> {
        let (profile, re, im) = spec.parts();
        let re = pad(re, n, "re")?;
        let im = pad(im, n, "im")?;
        let mut amp = [ZERO; MAX_DIM];
        for d in 0..n {
            amp[d] = Complex64::new(re[d], im[d]);
        }
        Ok(Self { amp, profile: Profile::from_spec(&profile, n)? })
    }

    fn amp_norm(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Debug)]
struct ScalarField {
    amp: Complex64,
    profile: Profile,
}

#[derive(Clone, Debug)]
struct Forcing {
    amp: Complex64,
    profile: Profile,
    omega: f64,
}

#[derive(Clone, Debug)]
struct Cubic {
    beta: Complex64,
    gamma: Complex64,
}

/// Evaluable coefficient tuple (a, b₁, b₂, c₁, c₂, f).
#[derive(Clone, Debug)]
pub struct CoefficientModel {
    spec: ModelSpec,
    signature: Signature,
    flat_radius: f64,
    b1: Option<VectorField>,
    b2: Option<VectorField>,
    c1: Option<ScalarField>,
    c2: Option<ScalarField>,
    forcing: Option<Forcing>,
    cubic: Option<Cubic>,
}

impl CoefficientModel {
    pub fn new(spec: ModelSpec, flat_radius: f64) -> Result<Self> {
        let signature = spec.signature.validated()?;
        let n = signature.dim();
        if !(flat_radius > 0.0) {
            return Err(config("flat radius must be positive"));
        }
        if spec.decay_exponent == 0 || spec.derivative_budget == 0 {
            return Err(config("decay_exponent and derivative_budget must be positive"));
        }
        match &spec.family {
            PrincipalSpec::GaussianBump { width, .. } | PrincipalSpec::RingWell { width, .. } if !(*width > 0.0) => {
                return Err(config("family width must be positive"));
            }
            PrincipalSpec::RationalDecay { exponent, .. } if !(*exponent > 0.0) => {
                return Err(config("rational_decay exponent must be positive"));
            }
            _ => {}
        }
        let scalar = |s: &ScalarSpec| -> Result<ScalarField> {
            let (profile, amp) = s.parts();
            Ok(ScalarField { amp, profile: Profile::from_spec(&profile, n)? })
        };
        let forcing = match &spec.forcing {
            Some(f) => {
                let profile = Profile::from_spec(&ProfileSpec::Gaussian { width: f.width, center: f.center.clone() }, n)?;
                Some(Forcing { amp: Complex64::new(f.re, f.im), profile, omega: f.omega })
            }
            None => None,
        };
        let cubic = match &spec.family {
            PrincipalSpec::QuasilinearCubic { beta, gamma, .. } => Some(Cubic {
                beta: Complex64::new(beta[0], beta[1]),
                gamma: Complex64::new(gamma[0], gamma[1]),
            }),
            _ => None,
        };
        Ok(Self {
            signature,
            flat_radius,
            b1: spec.b1.as_ref().map(|v| VectorField::from_spec(v, n)).transpose()?,
            b2: spec.b2.as_ref().map(|v| VectorField::from_spec(v, n)).transpose()?,
            c1: spec.c1.as_ref().map(scalar).transpose()?,
            c2: spec.c2.as_ref().map(scalar).transpose()?,
            forcing,
            cubic,
            spec,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn dim(&self) -> usize {
        self.signature.dim()
    }

    pub fn flat_radius(&self) -> f64 {
        self.flat_radius
    }

    pub fn decay_exponent(&self) -> u32 {
        self.spec.decay_exponent
    }

    pub fn derivative_budget(&self) -> u32 {
        self.spec.derivative_budget
    }

    /// Coefficients depend on z = (u, ∇u).
    pub fn is_quasilinear(&self) -> bool {
        self.cubic.is_some()
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self.spec.family, PrincipalSpec::GaussianBump { time_drift, .. } if time_drift != 0.0)
            || self.forcing.as_ref().is_some_and(|f| f.omega != 0.0)
    }

    pub fn has_principal_perturbation(&self) -> bool {
        !matches!(self.spec.family, PrincipalSpec::Flat {})
    }

    /// b₁ vanishes identically (including any state-dependent part).
    pub fn b1_is_zero(&self) -> bool {
        self.b1.as_ref().is_none_or(|b| b.amp_norm() == 0.0)
            && self.cubic.as_ref().is_none_or(|c| c.beta == ZERO)
    }

    pub fn has_lower_order(&self) -> bool {
        !self.b1_is_zero()
            || self.b2.is_some()
            || self.c1.is_some()
            || self.c2.is_some()
            || self.cubic.as_ref().is_some_and(|c| c.gamma != ZERO)
    }

    pub fn has_forcing(&self) -> bool {
        self.forcing.as_ref().is_some_and(|f| f.amp != ZERO)
    }

    /// SHA-256 of the canonical JSON spec and the flat radius.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.spec).expect("spec serializes"));
        h.update(self.flat_radius.to_le_bytes());
        hex::encode(h.finalize())
    }

    #[inline]
    fn taper(&self, r: f64) -> f64 {
        let rf = self.flat_radius;
        1.0 - smooth_step((r - 0.75 * rf) / (0.25 * rf))
    }

    #[inline]
    fn taper_derivative(&self, r: f64) -> f64 {
        let rf = self.flat_radius;
        -smooth_step_derivative((r - 0.75 * rf) / (0.25 * rf)) / (0.25 * rf)
    }

    /// Scalar perturbation φ(x,t,z) of the principal part (before tapering) and its x-gradient.
    fn perturbation(&self, x: &[f64], t: f64, z: &StateSample, grad: Option<&mut [f64]>) -> f64 {
        let n = self.dim();
        let r2: f64 = x[..n].iter().map(|c| c * c).sum();
        match &self.spec.family {
            PrincipalSpec::Flat {} => {
                if let Some(g) = grad {
                    g[..n].fill(0.0);
                }
                0.0
            }
            PrincipalSpec::GaussianBump { amplitude, width, time_drift } => {
                let w2 = width * width;
                let phi = amplitude * (1.0 + time_drift * t) * (-r2 / w2).exp();
                if let Some(g) = grad {
                    for d in 0..n {
                        g[d] = -2.0 * x[d] / w2 * phi;
                    }
                }
                phi
            }
            PrincipalSpec::RationalDecay { amplitude, exponent } => {
                let base = 1.0 + r2;
                let phi = amplitude * base.powf(-exponent / 2.0);
                if let Some(g) = grad {
                    for d in 0..n {
                        g[d] = -exponent * x[d] / base * phi;
                    }
                }
                phi
            }
            PrincipalSpec::RingWell { depth, radius, width } => {
                let r = r2.sqrt();
                let w2 = width * width;
                let phi = -depth * (-(r - radius) * (r - radius) / w2).exp();
                if let Some(g) = grad {
                    for d in 0..n {
                        g[d] = if r > 1e-300 { phi * (-2.0 * (r - radius) / w2) * x[d] / r } else { 0.0 };
                    }
                }
                phi
            }
            PrincipalSpec::QuasilinearCubic { alpha, .. } => {
                if let Some(g) = grad {
                    g[..n].fill(0.0);
                }
                alpha * (z.u.norm_sqr() + z.grad[..n].iter().map(|v| v.norm_sqr()).sum::<f64>())
            }
        }
    }

    /// Principal matrix a(x, t, z).
    pub fn a(&self, x: &[f64], t: f64, z: &StateSample) -> SmallMatrix {
        let base = self.signature.matrix();
        if !self.has_principal_perturbation() {
            return base;
        }
        let r = x[..self.dim()].iter().map(|c| c * c).sum::<f64>().sqrt();
        let taper = self.taper(r);
        if taper == 0.0 {
            return base;
        }
        base.shift_diagonal(taper * self.perturbation(x, t, z, None))
    }

    /// Analytic ∂_{x_j} a for j < n (z held fixed).
    pub fn a_gradient(&self, x: &[f64], t: f64, z: &StateSample) -> [SmallMatrix; MAX_DIM] {
        let n = self.dim();
        let mut out = [SmallMatrix::zeros(n); MAX_DIM];
        if !self.has_principal_perturbation() {
            return out;
        }
        let r = x[..n].iter().map(|c| c * c).sum::<f64>().sqrt();
        let taper = self.taper(r);
        let dtaper = self.taper_derivative(r);
        if taper == 0.0 && dtaper == 0.0 {
            return out;
        }
        let mut g = [0.0; MAX_DIM];
        let phi = self.perturbation(x, t, z, Some(&mut g));
        for d in 0..n {
            let radial = if r > 0.0 { dtaper * x[d] / r * phi } else { 0.0 };
            out[d] = SmallMatrix::zeros(n).shift_diagonal(radial + taper * g[d]);
        }
        out
    }

    /// Central-difference ∂_{x_j} a with step `h`.
    pub fn a_gradient_fd(&self, x: &[f64], t: f64, z: &StateSample, h: f64) -> [SmallMatrix; MAX_DIM] {
        let n = self.dim();
        let mut out = [SmallMatrix::zeros(n); MAX_DIM];
        let mut xp = [0.0; MAX_DIM];
        let mut xm = [0.0; MAX_DIM];
        for d in 0..n {
            xp[..n].copy_from_slice(&x[..n]);
            xm[..n].copy_from_slice(&x[..n]);
            xp[d] += h;
            xm[d] -= h;
            out[d] = self.a(&xp[..n], t, z).sub(&self.a(&xm[..n], t, z)).scaled(1.0 / (2.0 * h));
        }
        out
    }

    fn vector(&self, field: &Option<VectorField>, x: &[f64]) -> [Complex64; MAX_DIM] {
        let mut out = [ZERO; MAX_DIM];
        if let Some(f) = field {
            let n = self.dim();
            let r = x[..n].iter().map(|c| c * c).sum::<f64>().sqrt();
            let w = self.taper(r);
            if w > 0.0 {
                let p = f.profile.value(&x[..n]) * w;
                for d in 0..n {
                    out[d] = f.amp[d] * p;
                }
            }
        }
        out
    }

    fn scalar(&self, field: &Option<ScalarField>, x: &[f64]) -> Complex64 {
        match field {
            Some(f) => {
                let n = self.dim();
                let r = x[..n].iter().map(|c| c * c).sum::<f64>().sqrt();
                let w = self.taper(r);
                if w > 0.0 {
                    f.amp * (f.profile.value(&x[..n]) * w)
                } else {
                    ZERO
                }
            }
            None => ZERO,
        }
    }

    pub fn b1(&self, x: &[f64], _t: f64, z: &StateSample) -> [Complex64; MAX_DIM] {
        let mut out = self.vector(&self.b1, x);
        if let Some(c) = &self.cubic {
            if c.beta != ZERO {
                let r = x[..self.dim()].iter().map(|v| v * v).sum::<f64>().sqrt();
                out[0] += c.beta * (z.u.norm_sqr() * self.taper(r));
            }
        }
        out
    }

    pub fn b2(&self, x: &[f64], _t: f64, _z: &StateSample) -> [Complex64; MAX_DIM] {
        self.vector(&self.b2, x)
    }

    pub fn c1(&self, x: &[f64], _t: f64, z: &StateSample) -> Complex64 {
        let mut out = self.scalar(&self.c1, x);
        if let Some(c) = &self.cubic {
            if c.gamma != ZERO {
                let r = x[..self.dim()].iter().map(|v| v * v).sum::<f64>().sqrt();
                out += c.gamma * (z.u.norm_sqr() * self.taper(r));
            }
        }
        out
    }

    pub fn c2(&self, x: &[f64], _t: f64, _z: &StateSample) -> Complex64 {
        self.scalar(&self.c2, x)
    }

    pub fn forcing(&self, x: &[f64], t: f64) -> Complex64 {
        match &self.forcing {
            Some(f) => {
                let n = self.dim();
                let r = x[..n].iter().map(|c| c * c).sum::<f64>().sqrt();
                let w = self.taper(r);
                f.amp * Complex64::from_polar(f.profile.value(&x[..n]) * w, f.omega * t)
            }
            None => ZERO,
        }
    }

    /// Bound on ∫|b₁(X)·Ξ| ds over the outgoing straight tail of a ray that has reached |X| = ρ
    /// with |Ξ| = `xi_norm` in a region where a ≡ A_h.
    pub fn b1_tail_bound(&self, rho: f64, xi_norm: f64) -> f64 {
        if rho >= self.flat_radius {
            return 0.0;
        }
        match &self.b1 {
            Some(f) => f.amp_norm() * xi_norm * f.profile.outgoing_line_integral_bound(rho, 2.0 * xi_norm),
            None => 0.0,
        }
    }
}
