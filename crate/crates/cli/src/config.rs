//! Experiment configuration: TOML schema, validation, hashing and the sweep expansion.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use uhs_core::diagnostics::SmoothingRhs;
use uhs_core::solver::TrackedNorm;
use uhs_core::{CoefficientModel, ComplexField, Grid, ModelSpec, PhasePoint, Scheme, SolverConfig};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable that overrides the symbol cache location.
pub const CACHE_ENV: &str = "UHS_CACHE_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Relative paths are resolved against the configuration file's directory.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub model: ModelSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub rays: RaysSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub cache: CacheSpec,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("uhs-out")
}

/// Box [−L, L)ⁿ with `points` per axis; n comes from the model signature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub half_width: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// A e^{−|x−c|²/w²}.
    Gaussian {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "two")]
        width: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// A e^{iξ_k·x} on the lattice frequency with integer index `k`.
    PlaneWave {
        k: Vec<i64>,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Gaussian { amplitude: 1.0, width: 2.0, center: vec![] }
    }
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "one")]
    pub t_final: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_budget")]
    pub stability_budget: f64,
    #[serde(default)]
    pub tracked_norms: Vec<TrackedNorm>,
    #[serde(default = "default_smoothing_order")]
    pub smoothing_order: f64,
    #[serde(default)]
    pub track_self_adjoint: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
}

fn default_epsilon() -> f64 {
    1e-3
}
fn default_dt() -> f64 {
    1e-3
}
fn default_scheme() -> Scheme {
    Scheme::ImexRk2
}
fn default_record_every() -> usize {
    10
}
fn default_budget() -> f64 {
    0.25
}
fn default_smoothing_order() -> f64 {
    0.5
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            epsilon: default_epsilon(),
            dt: default_dt(),
            t_final: 1.0,
            scheme: default_scheme(),
            record_every: default_record_every(),
            stability_budget: default_budget(),
            tracked_norms: vec![],
            smoothing_order: default_smoothing_order(),
            track_self_adjoint: false,
            r0: None,
        }
    }
}

/// Sweep axes; an empty list falls back to the single value configured elsewhere.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub epsilon: Vec<f64>,
    /// Truncation radius R of the integrating factor (used when `kstar` is selected).
    #[serde(default)]
    pub radius: Vec<f64>,
    /// Grid points per axis.
    #[serde(default)]
    pub points: Vec<usize>,
    /// Multiplier of the initial datum.
    #[serde(default)]
    pub amplitude: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaysSpec {
    #[serde(default)]
    pub seeds: Vec<PhasePoint>,
    /// Additional seeds with x uniform in [−seed_box/2, seed_box/2]ⁿ and unit ξ.
    #[serde(default)]
    pub random: usize,
    #[serde(default = "default_seed_box")]
    pub seed_box: f64,
    #[serde(default = "default_s_max")]
    pub s_max: f64,
    /// Defaults to the flat radius 0.9L.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_escape: Option<f64>,
    #[serde(default = "default_ray_tol")]
    pub tol: f64,
    #[serde(default = "yes")]
    pub trajectories: bool,
    /// When non-empty, the Ichinose functional is evaluated on the seeds at these R.
    #[serde(default)]
    pub ichinose_radii: Vec<f64>,
}

fn default_seed_box() -> f64 {
    8.0
}
fn default_s_max() -> f64 {
    1e3
}
fn default_ray_tol() -> f64 {
    1e-10
}
fn yes() -> bool {
    true
}

impl Default for RaysSpec {
    fn default() -> Self {
        Self {
            seeds: vec![],
            random: 0,
            seed_box: default_seed_box(),
            s_max: default_s_max(),
            rho_escape: None,
            tol: default_ray_tol(),
            trajectories: true,
            ichinose_radii: vec![],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    Smoothing,
    Kstar,
    Interpolation,
    Garding,
    Continuation,
}

impl EstimateKind {
    pub fn needs_runs(self) -> bool {
        matches!(self, EstimateKind::Smoothing | EstimateKind::Kstar | EstimateKind::Continuation)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    #[serde(default)]
    pub estimates: Vec<EstimateKind>,
    /// Ñ of the weight ⟨x⟩^{−Ñ}.
    #[serde(default = "two")]
    pub ntilde: f64,
    #[serde(default)]
    pub smoothing_rhs: SmoothingRhs,
    /// Truncation radius when the sweep has none.
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_interpolation_fields")]
    pub interpolation_fields: usize,
    #[serde(default = "default_garding_samples")]
    pub garding_samples: usize,
    #[serde(default)]
    pub garding_t: f64,
    #[serde(default = "default_norm_iterations")]
    pub norm_iterations: usize,
    /// Size threshold of the continuation monitor.
    #[serde(default = "default_lambda")]
    pub lambda_threshold: f64,
}

fn default_radius() -> f64 {
    4.0
}
fn default_interpolation_fields() -> usize {
    200
}
fn default_garding_samples() -> usize {
    10_000
}
fn default_norm_iterations() -> usize {
    30
}
fn default_lambda() -> f64 {
    10.0
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        Self {
            estimates: vec![],
            ntilde: 2.0,
            smoothing_rhs: SmoothingRhs::Forcing,
            radius: default_radius(),
            interpolation_fields: default_interpolation_fields(),
            garding_samples: default_garding_samples(),
            garding_t: 0.0,
            norm_iterations: default_norm_iterations(),
            lambda_threshold: default_lambda(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheSpec {
    /// Overridden by UHS_CACHE_DIR; defaults to `<output_dir>/cache`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Direction nodes per axis of the ray tables.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Chunk length of the quantized apply; dense when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_size: Option<usize>,
}

fn default_resolution() -> usize {
    16
}

impl Default for CacheSpec {
    fn default() -> Self {
        Self { dir: None, resolution: default_resolution(), chunk_size: None }
    }
}

/// One entry of the sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunPoint {
    pub epsilon: f64,
    pub points: usize,
    pub amplitude: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

/// A validated configuration with its file location and content hash.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub path: PathBuf,
    pub hash: String,
}

fn schema_error(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Config { path: path.to_path_buf(), message: message.into() }
}

impl LoadedConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| schema_error(path, format!("cannot read file: {e}")))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> CliResult<Self> {
        let raw: toml::Table = toml::from_str(text).map_err(|e| schema_error(path, e.to_string()))?;
        match raw.get("schema_version").and_then(|v| v.as_integer()) {
            Some(v) if v == SCHEMA_VERSION as i64 => {}
            Some(v) => return Err(schema_error(path, format!("schema_version {v} is not supported (expected {SCHEMA_VERSION})"))),
            None => return Err(schema_error(path, format!("missing integer key `schema_version` (expected {SCHEMA_VERSION})"))),
        }
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| schema_error(path, e.to_string()))?;
        config.validate().map_err(|m| schema_error(path, m))?;
        let hash = config.hash();
        Ok(Self { config, path: path.to_path_buf(), hash })
    }

    fn base_dir(&self) -> PathBuf {
        self.path.parent().filter(|p| !p.as_os_str().is_empty()).map_or_else(|| PathBuf::from("."), Path::to_path_buf)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir().join(&self.config.output_dir)
    }

    pub fn cache_dir(&self) -> PathBuf {
        if let Some(dir) = std::env::var_os(CACHE_ENV).filter(|d| !d.is_empty()) {
            return PathBuf::from(dir);
        }
        match &self.config.cache.dir {
            Some(d) => self.base_dir().join(d),
            None => self.output_dir().join("cache"),
        }
    }

    pub fn short_hash(&self) -> &str {
        &self.hash[..16]
    }
}

fn canonical_hash(value: &Value) -> String {
    // serde_json maps are ordered by key, so the serialization is independent of input order.
    hex::encode(Sha256::digest(value.to_string().as_bytes()))
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), String> {
        let sig = self.model.signature.validated().map_err(|e| e.to_string())?;
        let n = sig.dim();
        for p in self.grid_points() {
            Grid::new(n, self.grid.half_width, p).map_err(|e| e.to_string())?;
        }
        self.model.build(self.grid.half_width).map_err(|e| e.to_string())?;
        for eps in self.epsilons() {
            let mut cfg = self.solver_config(eps, Grid::new(n, self.grid.half_width, self.grid.points).map_err(|e| e.to_string())?);
            cfg.epsilon = eps;
            cfg.validate().map_err(|e| e.to_string())?;
        }
        match &self.initial {
            InitialSpec::Gaussian { width, center, .. } => {
                if !(*width > 0.0) {
                    return Err("initial.width must be positive".into());
                }
                if !center.is_empty() && center.len() != n {
                    return Err(format!("initial.center has {} entries, the model has dimension {n}", center.len()));
                }
            }
            InitialSpec::PlaneWave { k, .. } => {
                if k.len() != n {
                    return Err(format!("initial.k has {} entries, the model has dimension {n}", k.len()));
                }
            }
        }
        if self.sweep.amplitude.iter().any(|a| !a.is_finite()) {
            return Err("sweep.amplitude entries must be finite".into());
        }
        if self.radii().iter().any(|r| !(*r > 0.0)) {
            return Err("truncation radii must be positive".into());
        }
        for (i, s) in self.rays.seeds.iter().enumerate() {
            PhasePoint::new(s.x.clone(), s.xi.clone()).map_err(|e| format!("rays.seeds[{i}]: {e}"))?;
            if s.x.len() != n {
                return Err(format!("rays.seeds[{i}] has dimension {}, the model has {n}", s.x.len()));
            }
        }
        if !(self.rays.s_max > 0.0) || !(self.rays.seed_box >= 0.0) {
            return Err("rays.s_max must be positive and rays.seed_box nonnegative".into());
        }
        if self.rays.rho_escape.is_some_and(|r| r < 0.9 * self.grid.half_width) {
            return Err(format!("rays.rho_escape must be at least the flat radius {}", 0.9 * self.grid.half_width));
        }
        if !(self.diagnostics.ntilde > 1.0) {
            return Err("diagnostics.ntilde must exceed 1".into());
        }
        if self.cache.resolution < 2 || self.cache.chunk_size == Some(0) {
            return Err("cache.resolution must be at least 2 and cache.chunk_size positive".into());
        }
        let d = &self.diagnostics;
        if d.garding_samples == 0 || d.norm_iterations == 0 {
            return Err("diagnostics sample counts must be positive".into());
        }
        let mut seen = d.estimates.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != d.estimates.len() {
            return Err("diagnostics.estimates lists an estimate twice".into());
        }
        if self.model.build(self.grid.half_width).map_err(|e| e.to_string())?.is_quasilinear()
            && d.estimates.contains(&EstimateKind::Smoothing)
        {
            return Err("the smoothing estimate needs a linear (z-independent) model".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, excluding output and cache locations.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(map) = &mut v {
            map.remove("output_dir");
            if let Some(Value::Object(cache)) = map.get_mut("cache") {
                cache.remove("dir");
            }
        }
        canonical_hash(&v)
    }

    pub fn epsilons(&self) -> Vec<f64> {
        if self.sweep.epsilon.is_empty() {
            vec![self.solver.epsilon]
        } else {
            self.sweep.epsilon.clone()
        }
    }

    pub fn grid_points(&self) -> Vec<usize> {
        if self.sweep.points.is_empty() {
            vec![self.grid.points]
        } else {
            self.sweep.points.clone()
        }
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        if self.sweep.amplitude.is_empty() {
            vec![1.0]
        } else {
            self.sweep.amplitude.clone()
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        if self.sweep.radius.is_empty() {
            vec![self.diagnostics.radius]
        } else {
            self.sweep.radius.clone()
        }
    }

    pub fn wants(&self, kind: EstimateKind) -> bool {
        self.diagnostics.estimates.contains(&kind)
    }

    pub fn needs_runs(&self) -> bool {
        self.diagnostics.estimates.iter().any(|k| k.needs_runs())
    }

    /// Cartesian product of the sweep axes; R only enters when K/E tracking is selected.
    pub fn run_points(&self) -> Vec<RunPoint> {
        let radii: Vec<Option<f64>> =
            if self.wants(EstimateKind::Kstar) { self.radii().into_iter().map(Some).collect() } else { vec![None] };
        let mut out = Vec::new();
        for &points in &self.grid_points() {
            for &amplitude in &self.amplitudes() {
                for &radius in &radii {
                    for &epsilon in &self.epsilons() {
                        out.push(RunPoint { epsilon, points, amplitude, radius });
                    }
                }
            }
        }
        out
    }

    /// Hash of everything that determines one run's record.
    pub fn run_hash(&self, point: &RunPoint) -> String {
        let mut basis = serde_json::json!({
            "model": self.model,
            "half_width": self.grid.half_width,
            "initial": self.initial,
            "solver": self.solver,
            "ntilde": self.diagnostics.ntilde,
            "point": point,
        });
        if point.radius.is_some() {
            basis["resolution"] = self.cache.resolution.into();
        }
        canonical_hash(&basis)[..16].to_string()
    }

    pub fn grid_for(&self, points: usize) -> Grid {
        Grid::new(self.model.signature.dim(), self.grid.half_width, points).expect("validated grid")
    }

    pub fn build_model(&self) -> CoefficientModel {
        self.model.build(self.grid.half_width).expect("validated model")
    }

    pub fn solver_config(&self, epsilon: f64, grid: Grid) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            epsilon,
            dt: s.dt,
            t_final: s.t_final,
            scheme: s.scheme,
            grid,
            record_every: s.record_every,
            stability_budget: s.stability_budget,
            tracked_norms: s.tracked_norms.clone(),
            smoothing_weight: self.diagnostics.ntilde,
            smoothing_order: s.smoothing_order,
            snapshot_every: None,
            track_self_adjoint: s.track_self_adjoint,
            r0: s.r0,
        }
    }

    pub fn initial_field(&self, grid: Grid, amplitude: f64) -> CliResult<ComplexField> {
        let field = match &self.initial {
            InitialSpec::Gaussian { amplitude: a, width, center } => {
                let c: Vec<f64> = if center.is_empty() { vec![0.0; grid.dim()] } else { center.clone() };
                ComplexField::from_fn(grid, |x| {
                    let r2: f64 = x.iter().zip(&c).map(|(xi, ci)| (xi - ci) * (xi - ci)).sum();
                    Complex64::new(a * (-r2 / (width * width)).exp(), 0.0)
                })
            }
            InitialSpec::PlaneWave { k, amplitude: a } => ComplexField::plane_wave(grid, k)?.scale(Complex64::new(*a, 0.0)),
        };
        Ok(field.scale(Complex64::new(amplitude, 0.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
[model]
signature = { n = 2, k = 1 }
family = { name = "flat" }
[grid]
half_width = 8.0
points = 16
"#;

    fn parse(text: &str) -> CliResult<LoadedConfig> {
        LoadedConfig::parse(text, Path::new("exp.toml"))
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.config.solver, SolverSpec::default());
        assert_eq!(c.config.run_points().len(), 1);
        assert_eq!(c.output_dir(), Path::new(".").join("uhs-out"));
        assert_eq!(c.hash.len(), 64);
    }

    #[test]
    fn unknown_keys_and_versions_are_rejected() {
        let err = parse(&format!("{MINIMAL}\n[solver]\nstep = 0.1\n")).unwrap_err();
        assert!(err.to_string().contains("step"), "{err}");
        assert!(parse(&MINIMAL.replace("schema_version = 1", "schema_version = 2")).is_err());
        assert!(parse(&MINIMAL.replace("schema_version = 1", "")).is_err());
        assert!(parse(&MINIMAL.replace("points = 16", "points = 24")).is_err());
    }

    #[test]
    fn explicit_defaults_do_not_change_the_hash() {
        let a = parse(MINIMAL).unwrap();
        let b = parse(&format!("{MINIMAL}\n[solver]\ndt = 1e-3\nscheme = \"imex_rk2\"\n")).unwrap();
        assert_eq!(a.hash, b.hash);
        let c = parse(&format!("{MINIMAL}\n[solver]\ndt = 2e-3\n")).unwrap();
        assert_ne!(a.hash, c.hash);
    }

    #[test]
    fn output_location_does_not_change_the_hash() {
        let a = parse(MINIMAL).unwrap();
        let b = parse(&MINIMAL.replace("schema_version = 1", "schema_version = 1\noutput_dir = \"elsewhere\"")).unwrap();
        assert_eq!(a.hash, b.hash);
    }

    #[test]
    fn sweep_is_a_cartesian_product() {
        let text = format!("{MINIMAL}\n[sweep]\nepsilon = [1e-2, 1e-3, 1e-4]\namplitude = [0.5, 1.0]\nradius = [2.0, 4.0]\n");
        let c = parse(&text).unwrap().config;
        // R is ignored without K/E tracking.
        assert_eq!(c.run_points().len(), 6);
        let with_kstar = parse(&format!("{text}\n[diagnostics]\nestimates = [\"kstar\"]\n")).unwrap().config;
        let pts = with_kstar.run_points();
        assert_eq!(pts.len(), 12);
        let mut hashes: Vec<String> = pts.iter().map(|p| with_kstar.run_hash(p)).collect();
        hashes.sort();
        hashes.dedup();
        assert_eq!(hashes.len(), 12);
    }

    #[test]
    fn run_hash_ignores_diagnostic_selection() {
        let a = parse(MINIMAL).unwrap().config;
        let b = parse(&format!("{MINIMAL}\n[diagnostics]\nestimates = [\"interpolation\"]\n")).unwrap().config;
        assert_eq!(a.run_hash(&a.run_points()[0]), b.run_hash(&b.run_points()[0]));
    }

    #[test]
    fn initial_profiles() {
        let c = parse(&format!("{MINIMAL}\n[initial]\nprofile = \"plane_wave\"\nk = [1, 2]\namplitude = 2.0\n")).unwrap().config;
        let g = c.grid_for(16);
        let u = c.initial_field(g, 0.5).unwrap();
        assert!(u.values().iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        assert!(parse(&format!("{MINIMAL}\n[initial]\nprofile = \"plane_wave\"\nk = [1]\n")).is_err());
    }

    #[test]
    fn smoothing_needs_a_linear_model() {
        let q = MINIMAL.replace("family = { name = \"flat\" }", "family = { name = \"quasilinear_cubic\", alpha = 0.1 }");
        assert!(parse(&q).is_ok());
        assert!(parse(&format!("{q}\n[diagnostics]\nestimates = [\"smoothing\"]\n")).is_err());
    }
}
