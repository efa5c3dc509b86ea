//! Binary cache of the extension operator's kernel blocks.
//!
//! Layout (little endian): `b"HWYK"`, then `u32` version, dimension,
//! polar count, azimuth count and kernel degree, then `u64` rows and
//! columns, then `rows * cols` `f64` values in row-major order.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use hwy_core::extension::{block_count, PoissonOperator};
use hwy_core::quadrature::QuadratureGrid;

use crate::error::{LabError, LabResult};

pub const MAGIC: &[u8; 4] = b"HWYK";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub dim: u32,
    pub polar: u32,
    pub azimuth: u32,
    pub degree: u32,
    pub rows: u64,
    pub cols: u64,
}

const HEADER_LEN: usize = 4 + 5 * 4 + 2 * 8;

fn sphere_shape(g: &QuadratureGrid) -> LabResult<(u32, u32)> {
    match g.resolution() {
        [p, .., m] => Ok((*p as u32, *m as u32)),
        _ => Err(LabError::Cache("needs a product sphere grid".into())),
    }
}

pub fn header_for(op: &PoissonOperator) -> LabResult<Header> {
    let (polar, azimuth) = sphere_shape(op.sphere_grid())?;
    let p = op.polar_count() as u64;
    Ok(Header {
        dim: op.sphere_grid().dim().get() as u32,
        polar,
        azimuth,
        degree: op.degree() as u32,
        rows: block_count(op.degree()) as u64 * p,
        cols: p,
    })
}

pub fn write<W: Write>(mut w: W, op: &PoissonOperator) -> LabResult<()> {
    let h = header_for(op)?;
    let mut buf = Vec::with_capacity(HEADER_LEN + op.blocks().len() * 8);
    buf.extend_from_slice(MAGIC);
    for v in [VERSION, h.dim, h.polar, h.azimuth, h.degree] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&h.rows.to_le_bytes());
    buf.extend_from_slice(&h.cols.to_le_bytes());
    for x in op.blocks() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf).map_err(|e| LabError::io("<kernel cache>", e))
}

/// Parse a cache image into its header and block values.
pub fn parse(bytes: &[u8]) -> LabResult<(Header, Vec<f64>)> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(LabError::Cache("is not a kernel cache".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(LabError::Cache(format!("has unsupported version {version}")));
    }
    let h = Header {
        dim: u32_at(8),
        polar: u32_at(12),
        azimuth: u32_at(16),
        degree: u32_at(20),
        rows: u64_at(24),
        cols: u64_at(32),
    };
    let n = h
        .rows
        .checked_mul(h.cols)
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| LabError::Cache("has an impossible size".into()))?;
    let body = &bytes[HEADER_LEN..];
    if n.checked_mul(8) != Some(body.len()) {
        return Err(LabError::Cache(format!(
            "is truncated: {} bytes for {n} values",
            body.len()
        )));
    }
    let vals = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((h, vals))
}

/// Rebuild an operator on the given grids, refusing caches computed for
/// a different sphere grid.
pub fn read<R: Read>(mut r: R, sphere: Arc<QuadratureGrid>, ball: Arc<QuadratureGrid>) -> LabResult<PoissonOperator> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| LabError::io("<kernel cache>", e))?;
    let (h, blocks) = parse(&bytes)?;
    let (polar, azimuth) = sphere_shape(&sphere)?;
    let want = (sphere.dim().get() as u32, polar, azimuth);
    if (h.dim, h.polar, h.azimuth) != want {
        return Err(LabError::Cache(format!(
            "was built for d={} {}x{}, grid is d={} {}x{}",
            h.dim, h.polar, h.azimuth, want.0, want.1, want.2
        )));
    }
    let degree = h.degree as usize;
    // Widened so a damaged degree cannot overflow.
    let rows = (degree as u128 + 1) * (degree as u128 + 2) / 2 * h.cols as u128;
    if h.rows as u128 != rows {
        return Err(LabError::Cache("row count does not match the kernel degree".into()));
    }
    Ok(PoissonOperator::from_blocks(sphere, ball, degree, blocks)?)
}

pub fn save(path: &Path, op: &PoissonOperator) -> LabResult<()> {
    let f = fs::File::create(path).map_err(|e| LabError::io(path, e))?;
    write(BufWriter::new(f), op)
}

pub fn load(path: &Path, sphere: Arc<QuadratureGrid>, ball: Arc<QuadratureGrid>) -> LabResult<PoissonOperator> {
    let f = fs::File::open(path).map_err(|e| LabError::io(path, e))?;
    read(std::io::BufReader::new(f), sphere, ball)
}
