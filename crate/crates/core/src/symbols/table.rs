use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::{Complex32, Complex64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ray_symbol::{B1Variant, RaySymbol};
use crate::error::{Error, Result};
use crate::grid::{Grid, MAX_DIM};

const MAGIC: &[u8; 8] = b"UHSRTAB\0";
const VERSION: u32 = 1;

/// Tabulated unit directions: ±1 in one dimension, F equally spaced angles in two, and the six
/// faces of a cube with (F + 1)² nodes each in three.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionSet {
    pub dim: usize,
    pub resolution: usize,
}

/// Up to four (node, weight) pairs interpolating a direction.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Stencil {
    pub idx: [u32; 4],
    pub w: [f64; 4],
    pub len: u8,
}

impl Stencil {
    fn push(&mut self, i: usize, w: f64) {
        if w != 0.0 {
            self.idx[self.len as usize] = i as u32;
            self.w[self.len as usize] = w;
            self.len += 1;
        }
    }
}

impl DirectionSet {
    pub fn new(dim: usize, resolution: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) || (dim > 1 && resolution < 4) {
            return Err(Error::Config(format!("direction resolution {resolution} too small for dimension {dim}")));
        }
        Ok(Self { dim, resolution })
    }

    pub fn len(&self) -> usize {
        match self.dim {
            1 => 2,
            2 => self.resolution,
            _ => 6 * (self.resolution + 1) * (self.resolution + 1),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Unit vector of node `i`.
    pub fn node(&self, i: usize) -> [f64; MAX_DIM] {
        let mut out = [0.0; MAX_DIM];
        match self.dim {
            1 => out[0] = if i == 0 { -1.0 } else { 1.0 },
            2 => {
                let phi = 2.0 * std::f64::consts::PI * i as f64 / self.resolution as f64;
                out[0] = phi.cos();
                out[1] = phi.sin();
            }
            _ => {
                let per = (self.resolution + 1) * (self.resolution + 1);
                let face = i / per;
                let r = i % per;
                let f = self.resolution as f64;
                let u = -1.0 + 2.0 * (r / (self.resolution + 1)) as f64 / f;
                let v = -1.0 + 2.0 * (r % (self.resolution + 1)) as f64 / f;
                let axis = face / 2;
                let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
                let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
                out[axis] = sign;
                out[a] = u;
                out[b] = v;
                let nrm = (1.0 + u * u + v * v).sqrt();
                for c in out.iter_mut() {
                    *c /= nrm;
                }
            }
        }
        out
    }

    pub(crate) fn stencil(&self, xi: &[f64]) -> Stencil {
        let mut s = Stencil::default();
        match self.dim {
            1 => s.push(if xi[0] < 0.0 { 0 } else { 1 }, 1.0),
            2 => {
                let f = self.resolution;
                let phi = xi[1].atan2(xi[0]).rem_euclid(2.0 * std::f64::consts::PI);
                let t = phi / (2.0 * std::f64::consts::PI) * f as f64;
                let i0 = (t.floor() as usize).min(f - 1);
                let w = (t - i0 as f64).clamp(0.0, 1.0);
                s.push(i0, 1.0 - w);
                s.push((i0 + 1) % f, w);
            }
            _ => {
                let axis = (0..3).max_by(|&a, &b| xi[a].abs().total_cmp(&xi[b].abs())).unwrap_or(0);
                let face = 2 * axis + usize::from(xi[axis] < 0.0);
                let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
                let m = xi[axis].abs();
                let f = self.resolution;
                let grid_coord = |c: f64| {
                    let t = ((c / m + 1.0) * 0.5 * f as f64).clamp(0.0, f as f64);
                    let i0 = (t.floor() as usize).min(f - 1);
                    (i0, t - i0 as f64)
                };
                let (iu, wu) = grid_coord(xi[a]);
                let (iv, wv) = grid_coord(xi[b]);
                let base = face * (f + 1) * (f + 1);
                for (du, pu) in [(0, 1.0 - wu), (1, wu)] {
                    for (dv, pv) in [(0, 1.0 - wv), (1, wv)] {
                        s.push(base + (iu + du) * (f + 1) + iv + dv, pu * pv);
                    }
                }
            }
        }
        s
    }
}

/// Identifies a table: model, truncation radius, grid, variant, and tabulation resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayTableKey {
    pub model: String,
    pub radius: f64,
    pub grid: Grid,
    pub variant: B1Variant,
    pub directions: DirectionSet,
    pub radial_nodes: usize,
    pub tol: f64,
}

impl RayTableKey {
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("key serializes")
    }
}

pub fn cache_file_name(key: &RayTableKey) -> String {
    let digest = Sha256::digest(key.canonical().as_bytes());
    format!("raytable-{}.bin", &hex::encode(digest)[..24])
}

/// The ray integral J(x, ω, v) = ∫_{−∞}^0 σ ds tabulated on grid points × directions × radial
/// nodes v = 1/|ξ| ∈ [0, 1]; the symbol is p^R = −χ(|ξ|)J.
#[derive(Clone, Debug)]
pub struct RayTable {
    key: RayTableKey,
    values: Vec<Complex32>,
    zero: bool,
}

impl RayTable {
    pub fn key_for(symbol: &RaySymbol, grid: &Grid, resolution: usize, radial_nodes: usize) -> Result<RayTableKey> {
        let op = symbol.operator();
        if op.model().dim() != grid.dim() {
            return Err(Error::Config("table grid dimension differs from the model".into()));
        }
        let radial_nodes = if symbol.variant().is_radial() { radial_nodes.max(2) } else { 1 };
        Ok(RayTableKey {
            model: op.model().fingerprint(),
            radius: op.radius(),
            grid: *grid,
            variant: symbol.variant(),
            directions: DirectionSet::new(grid.dim(), resolution)?,
            radial_nodes,
            tol: symbol.options().tol,
        })
    }

    /// Integrates every tabulated ray, in parallel over grid points.
    pub fn build(symbol: &RaySymbol, grid: &Grid, resolution: usize, radial_nodes: usize) -> Result<Self> {
        let key = Self::key_for(symbol, grid, resolution, radial_nodes)?;
        let dirs = key.directions;
        let per_point = dirs.len() * key.radial_nodes;
        if symbol.is_trivial() {
            return Ok(Self { values: vec![Complex32::new(0.0, 0.0); grid.len() * per_point], key, zero: true });
        }
        let n = grid.dim();
        let nodes: Vec<[f64; MAX_DIM]> = (0..dirs.len()).map(|i| dirs.node(i)).collect();
        let nrad = key.radial_nodes;
        let mut values = vec![Complex32::new(0.0, 0.0); grid.len() * per_point];
        values.par_chunks_mut(per_point).enumerate().try_for_each(|(p, chunk)| -> Result<()> {
            let mut x = [0.0; MAX_DIM];
            grid.position(p, &mut x);
            for (d, node) in nodes.iter().enumerate() {
                for r in 0..nrad {
                    let v = if nrad == 1 { 1.0 } else { r as f64 / (nrad - 1) as f64 };
                    let j = symbol.unit_integral(&x[..n], &node[..n], v)?;
                    chunk[d * nrad + r] = Complex32::new(j.re as f32, j.im as f32);
                }
            }
            Ok(())
        })?;
        let zero = values.iter().all(|v| *v == Complex32::new(0.0, 0.0));
        Ok(Self { key, values, zero })
    }

    pub fn key(&self) -> &RayTableKey {
        &self.key
    }

    pub fn grid(&self) -> &Grid {
        &self.key.grid
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn values(&self) -> &[Complex32] {
        &self.values
    }

    pub(crate) fn per_point(&self) -> usize {
        self.key.directions.len() * self.key.radial_nodes
    }

    pub(crate) fn directions(&self) -> &DirectionSet {
        &self.key.directions
    }

    /// Radial interpolation: (node, weight) pairs for v = 1/|ξ|.
    pub(crate) fn radial_stencil(&self, xi_norm: f64) -> [(usize, f64); 2] {
        let nr = self.key.radial_nodes;
        if nr == 1 {
            return [(0, 1.0), (0, 0.0)];
        }
        let v = if xi_norm > 0.0 { (1.0 / xi_norm).min(1.0) } else { 1.0 };
        let t = v * (nr - 1) as f64;
        let i0 = (t.floor() as usize).min(nr - 2);
        let w = t - i0 as f64;
        [(i0, 1.0 - w), (i0 + 1, w)]
    }

    /// J at grid point `p` for a frequency described by its stencils.
    #[inline]
    pub(crate) fn lookup(&self, p: usize, dir: &Stencil, rad: &[(usize, f64); 2]) -> Complex64 {
        let base = p * self.per_point();
        let nr = self.key.radial_nodes;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..dir.len as usize {
            let row = base + dir.idx[k] as usize * nr;
            for &(r, wr) in rad {
                if wr != 0.0 {
                    let v = self.values[row + r];
                    acc += Complex64::new(v.re as f64, v.im as f64) * (dir.w[k] * wr);
                }
            }
        }
        acc
    }

    /// J at an arbitrary (x, ξ), multilinear in x between grid points (clamped to the box).
    pub fn integral_at(&self, x: &[f64], xi: &[f64]) -> Complex64 {
        if self.zero {
            return Complex64::new(0.0, 0.0);
        }
        let grid = &self.key.grid;
        let n = grid.dim();
        let dir = self.key.directions.stencil(xi);
        let rad = self.radial_stencil(crate::grid::norm(&xi[..n]));
        let m = grid.points_per_axis();
        let h = grid.spacing();
        let mut lo = [0usize; MAX_DIM];
        let mut w = [0.0; MAX_DIM];
        for d in 0..n {
            let t = ((x[d] + grid.half_width()) / h).clamp(0.0, (m - 1) as f64);
            lo[d] = (t.floor() as usize).min(m - 2);
            w[d] = t - lo[d] as f64;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for corner in 0..(1usize << n) {
            let mut idx = [0usize; MAX_DIM];
            let mut weight = 1.0;
            for d in 0..n {
                let up = (corner >> d) & 1;
                idx[d] = lo[d] + up;
                weight *= if up == 1 { w[d] } else { 1.0 - w[d] };
            }
            if weight != 0.0 {
                acc += self.lookup(grid.flat_index(&idx[..n]), &dir, &rad) * weight;
            }
        }
        acc
    }

    /// Writes header (magic, version, key) and little-endian f32 pairs; atomic via rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let key = self.key.canonical();
        let mut buf = Vec::with_capacity(64 + key.len() + 8 * self.values.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(key.len() as u32).to_le_bytes());
        buf.extend_from_slice(key.as_bytes());
        buf.extend_from_slice(&(self.key.grid.len() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.key.directions.len() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.key.radial_nodes as u64).to_le_bytes());
        for v in &self.values {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("bin.tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&buf)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Reads a table and checks that it was built for `expected`.
    pub fn load(path: &Path, expected: &RayTableKey) -> Result<Self> {
        let corrupt = |reason: &str| Error::CorruptCache { path: path.display().to_string(), reason: reason.into() };
        let bytes = fs::read(path)?;
        let mut pos = 0usize;
        let mut take = |k: usize| -> Result<&[u8]> {
            if pos + k > bytes.len() {
                return Err(corrupt("truncated file"));
            }
            let s = &bytes[pos..pos + k];
            pos += k;
            Ok(s)
        };
        if take(8)? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes"));
        let u64_at = |s: &[u8]| u64::from_le_bytes(s.try_into().expect("8 bytes"));
        if u32_at(take(4)?) != VERSION {
            return Err(corrupt("unsupported version"));
        }
        let klen = u32_at(take(4)?) as usize;
        let key = std::str::from_utf8(take(klen)?).map_err(|_| corrupt("key is not UTF-8"))?.to_string();
        if key != expected.canonical() {
            return Err(corrupt("key does not match the requested table"));
        }
        let points = u64_at(take(8)?) as usize;
        let ndir = u64_at(take(8)?) as usize;
        let nrad = u64_at(take(8)?) as usize;
        if points != expected.grid.len() || ndir != expected.directions.len() || nrad != expected.radial_nodes {
            return Err(corrupt("table shape does not match its key"));
        }
        let count = points * ndir * nrad;
        let body = take(8 * count)?;
        let values: Vec<Complex32> = body
            .chunks_exact(8)
            .map(|c| {
                Complex32::new(
                    f32::from_le_bytes(c[..4].try_into().expect("4 bytes")),
                    f32::from_le_bytes(c[4..].try_into().expect("4 bytes")),
                )
            })
            .collect();
        if pos != bytes.len() {
            return Err(corrupt("trailing bytes"));
        }
        let zero = values.iter().all(|v| *v == Complex32::new(0.0, 0.0));
        Ok(Self { key: expected.clone(), values, zero })
    }

    pub fn cache_path(dir: &Path, key: &RayTableKey) -> PathBuf {
        dir.join(cache_file_name(key))
    }

    /// Loads the cached table from `dir`, building and storing it when `allow_build` is set.
    pub fn load_or_build(
        dir: &Path,
        symbol: &RaySymbol,
        grid: &Grid,
        resolution: usize,
        radial_nodes: usize,
        allow_build: bool,
    ) -> Result<Self> {
        let key = Self::key_for(symbol, grid, resolution, radial_nodes)?;
        let path = Self::cache_path(dir, &key);
        if path.exists() {
            return Self::load(&path, &key);
        }
        if !allow_build {
            return Err(Error::MissingCache { key: cache_file_name(&key) });
        }
        let table = Self::build(symbol, grid, resolution, radial_nodes)?;
        table.save(&path)?;
        Ok(table)
    }
}
