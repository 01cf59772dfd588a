//! Binary field snapshots: a small fixed header followed by the raw
//! coefficient table.
//!
//! Layout: magic `FNSS`, format version (u32 LE), then d, n, component
//! count (u32 LE each), then the Sobolev index s, the cutoff parameter, and
//! the time stamp (f64 LE each), then the coefficients of each component in
//! row-major lattice order as interleaved (re, im) f64 LE.

use crate::error::{Error, Result};
use crate::spectral::{Grid, SpectralField};
use num_complex::Complex64;
use std::io::{Read as _, Write as _};
use std::path::Path;

const MAGIC: &[u8; 4] = b"FNSS";
const VERSION: u32 = 1;

/// Everything stored alongside the coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotMeta {
    pub s: f64,
    pub eps: f64,
    pub t: f64,
}

pub fn write_snapshot(field: &SpectralField, meta: &SnapshotMeta, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(field.grid.dim() as u32).to_le_bytes())?;
    w.write_all(&(field.grid.points_per_dim() as u32).to_le_bytes())?;
    w.write_all(&(field.comps as u32).to_le_bytes())?;
    w.write_all(&meta.s.to_le_bytes())?;
    w.write_all(&meta.eps.to_le_bytes())?;
    w.write_all(&meta.t.to_le_bytes())?;
    for c in 0..field.comps {
        for v in field.comp(c) {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32(r: &mut impl std::io::Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl std::io::Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_snapshot(path: &Path) -> Result<(SpectralField, SnapshotMeta)> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported format version {version}")));
    }
    let d = read_u32(&mut r)? as usize;
    let n = read_u32(&mut r)? as usize;
    let comps = read_u32(&mut r)? as usize;
    let s = read_f64(&mut r)?;
    let eps = read_f64(&mut r)?;
    let t = read_f64(&mut r)?;
    let grid = Grid::standard(d, n)?;
    if comps == 0 {
        return Err(Error::Snapshot("component count must be positive".into()));
    }
    let mut field = SpectralField::zeros(grid, comps);
    for c in 0..comps {
        for v in field.comp_mut(c) {
            let re = read_f64(&mut r)?;
            let im = read_f64(&mut r)?;
            *v = Complex64::new(re, im);
        }
    }
    let mut tail = [0u8; 1];
    if r.read(&mut tail)? != 0 {
        return Err(Error::Snapshot("trailing bytes after coefficient table".into()));
    }
    Ok((field, SnapshotMeta { s, eps, t }))
}
