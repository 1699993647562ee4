//! Dataset cache files.
//!
//! Little-endian layout:
//!
//! | field               | type                 |
//! |---------------------|----------------------|
//! | magic `FKDS`        | 4 bytes              |
//! | version (= 1)       | u32                  |
//! | benchmark id        | u32                  |
//! | seed                | u64                  |
//! | input dimension `d` | u32                  |
//! | ranges              | d × (f64 lo, f64 hi) |
//! | row count           | u64                  |
//! | rows                | count × (d + 1) f64  |
//!
//! Each row holds the raw inputs followed by the target.

use std::fs;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{generate_dataset, Benchmark, DataError, RawDataset};
use crate::kan::Sample;

pub const CACHE_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"FKDS";

pub fn write_dataset_cache<W: Write>(data: &RawDataset, mut w: W) -> Result<(), DataError> {
    let b = data.benchmark;
    w.write_all(MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&b.id().to_le_bytes())?;
    w.write_all(&data.seed.to_le_bytes())?;
    w.write_all(&(b.input_dim() as u32).to_le_bytes())?;
    for r in b.ranges() {
        let (lo, hi) = r.bounds();
        w.write_all(&lo.to_le_bytes())?;
        w.write_all(&hi.to_le_bytes())?;
    }
    w.write_all(&(data.samples.len() as u64).to_le_bytes())?;
    for s in &data.samples {
        for v in s.x.iter().chain(&s.y) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> io::Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    read_array::<8, _>(r).map(f64::from_le_bytes)
}

pub fn read_dataset_cache<R: Read>(mut r: R) -> Result<RawDataset, DataError> {
    if &read_array::<4, _>(&mut r)? != MAGIC {
        return Err(DataError::BadCache("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != CACHE_VERSION {
        return Err(DataError::BadCache(format!("version {version}")));
    }
    let id = u32::from_le_bytes(read_array(&mut r)?);
    let benchmark = *Benchmark::ALL
        .get(id as usize)
        .ok_or_else(|| DataError::BadCache(format!("benchmark id {id}")))?;
    let seed = u64::from_le_bytes(read_array(&mut r)?);
    let d = u32::from_le_bytes(read_array(&mut r)?) as usize;
    if d != benchmark.input_dim() {
        return Err(DataError::BadCache(format!("{d} inputs for {benchmark}")));
    }
    for range in benchmark.ranges() {
        let stored = (read_f64(&mut r)?, read_f64(&mut r)?);
        if stored != range.bounds() {
            return Err(DataError::BadCache(format!("range {stored:?} differs from {:?}", range.bounds())));
        }
    }
    let count = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let mut samples = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let x = (0..d).map(|_| read_f64(&mut r)).collect::<io::Result<Vec<_>>>()?;
        let y = read_f64(&mut r)?;
        samples.push(Sample::new(x, vec![y]));
    }
    Ok(RawDataset { benchmark, seed, samples })
}

/// Reads `path` if it holds exactly the requested dataset, otherwise generates it
/// and (re)writes the file.
pub fn load_or_generate(path: &Path, benchmark: Benchmark, n_samples: usize, seed: u64) -> Result<RawDataset, DataError> {
    if let Ok(file) = fs::File::open(path) {
        if let Ok(data) = read_dataset_cache(BufReader::new(file)) {
            if data.benchmark == benchmark && data.seed == seed && data.samples.len() == n_samples {
                return Ok(data);
            }
        }
    }
    let data = generate_dataset(benchmark, n_samples, seed)?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    write_dataset_cache(&data, BufWriter::new(fs::File::create(path)?))?;
    Ok(data)
}
