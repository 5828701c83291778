use std::path::Path;

use num_complex::Complex64;

use super::record::write_atomic;
use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::Grid;

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"UHSF";
pub const SNAPSHOT_HEADER_BYTES: usize = 32;
const VERSION: u32 = 1;

/// Field state at time t.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub field: ComplexField,
}

/// Header: magic, version, n, M (u32 each), t, L (f64 each); then little-endian (re, im) pairs.
pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<()> {
    let grid = snap.field.grid();
    let mut buf = Vec::with_capacity(SNAPSHOT_HEADER_BYTES + 16 * grid.len());
    buf.extend_from_slice(&SNAPSHOT_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.points_per_axis() as u32).to_le_bytes());
    buf.extend_from_slice(&snap.t.to_le_bytes());
    buf.extend_from_slice(&grid.half_width().to_le_bytes());
    for v in snap.field.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    write_atomic(path, &buf)
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let bytes = std::fs::read(path)?;
    let corrupt = |reason: &str| Error::CorruptCache { path: path.display().to_string(), reason: reason.into() };
    if bytes.len() < SNAPSHOT_HEADER_BYTES || bytes[..4] != SNAPSHOT_MAGIC {
        return Err(corrupt("not a field snapshot"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    if u32_at(4) != VERSION {
        return Err(corrupt("unsupported snapshot version"));
    }
    let grid = Grid::new(u32_at(8) as usize, f64_at(24), u32_at(12) as usize).map_err(|e| corrupt(&e.to_string()))?;
    let t = f64_at(16);
    if bytes.len() != SNAPSHOT_HEADER_BYTES + 16 * grid.len() {
        return Err(corrupt("payload length does not match the header"));
    }
    let values = (0..grid.len())
        .map(|i| {
            let o = SNAPSHOT_HEADER_BYTES + 16 * i;
            Complex64::new(f64_at(o), f64_at(o + 8))
        })
        .collect();
    Ok(Snapshot { t, field: ComplexField::from_values(grid, values)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let g = Grid::new(2, 3.0, 8).unwrap();
        let f = ComplexField::from_fn(g, |x| Complex64::new(x[0].exp(), -x[1] / 3.0));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bin");
        write_snapshot(&p, &Snapshot { t: 0.75, field: f.clone() }).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len() as usize, 32 + 16 * 64);
        let back = read_snapshot(&p).unwrap();
        assert_eq!(back.t, 0.75);
        assert_eq!(back.field.values(), f.values());
        std::fs::write(&p, b"nope").unwrap();
        assert!(matches!(read_snapshot(&p), Err(Error::CorruptCache { .. })));
    }
}
