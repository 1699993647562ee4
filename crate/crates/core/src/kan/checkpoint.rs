//! Binary checkpoint of a [`ParamVector`].
//!
//! All integers and floats are little-endian:
//!
//! | field            | type          |
//! |------------------|---------------|
//! | magic `FKAN`     | 4 bytes       |
//! | version (= 1)    | u32           |
//! | order            | u32           |
//! | grid             | u32           |
//! | width count `m`  | u32           |
//! | widths           | m × u32       |
//! | layer domains    | (m−1) × (f64 lo, f64 hi) |
//! | value count      | u64           |
//! | values           | count × f64   |
//!
//! Values are stored as f64 regardless of the in-memory scalar, so f64 networks
//! round-trip bit-identically.

use std::io::{self, Read, Write};

use thiserror::Error;

use super::{KanNetwork, KanSpec, ParamVector};
use crate::scalar::Scalar;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"FKAN";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint layout is inconsistent: {0}")]
    Corrupt(String),
}

pub fn write_checkpoint<T: Scalar, W: Write>(params: &ParamVector<T>, mut w: W) -> Result<(), CheckpointError> {
    let layout = &params.layout;
    w.write_all(MAGIC)?;
    for v in [CHECKPOINT_VERSION, layout.order() as u32, layout.grid() as u32, layout.widths().len() as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    for &width in layout.widths() {
        w.write_all(&(width as u32).to_le_bytes())?;
    }
    for &(lo, hi) in layout.domains() {
        w.write_all(&lo.to_le_bytes())?;
        w.write_all(&hi.to_le_bytes())?;
    }
    w.write_all(&(params.values.len() as u64).to_le_bytes())?;
    for v in &params.values {
        w.write_all(&v.as_f64().to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_checkpoint<T: Scalar, R: Read>(mut r: R) -> Result<ParamVector<T>, CheckpointError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let order = read_u32(&mut r)? as usize;
    let grid = read_u32(&mut r)? as usize;
    let count = read_u32(&mut r)? as usize;
    if !(2..=1024).contains(&count) {
        return Err(CheckpointError::Corrupt(format!("{count} widths")));
    }
    let widths = (0..count).map(|_| read_u32(&mut r).map(|v| v as usize)).collect::<io::Result<Vec<_>>>()?;
    let domains = (0..count - 1)
        .map(|_| Ok((read_f64(&mut r)?, read_f64(&mut r)?)))
        .collect::<io::Result<Vec<_>>>()?;
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;

    let mut spec = KanSpec::<T>::new(widths, order, grid);
    spec.input_domain = (T::lit(domains[0].0), T::lit(domains[0].1));
    if let Some(&(_, hi)) = domains.get(1) {
        spec.hidden_range = T::lit(hi);
    }
    let mut layout = KanNetwork::zeros(spec).map_err(|e| CheckpointError::Corrupt(e.to_string()))?.layout();
    if layout.domains() != domains.as_slice() {
        // Hidden layers may carry individual ranges; trust the stored ones.
        layout.domains = domains;
    }
    if len != layout.len() {
        return Err(CheckpointError::Corrupt(format!("{len} values for a layout of {}", layout.len())));
    }
    let values = (0..len).map(|_| read_f64(&mut r).map(T::lit)).collect::<io::Result<Vec<_>>>()?;
    Ok(ParamVector { values, layout })
}
