//! Bit-exact upload encoding.
//!
//! Layout, most significant bit first:
//!
//! ```text
//! header   grid | order | k | round | client          5 × 32 bits
//! alphas   one value per edge                          C0 × b bits
//! edges    [rank: position_bits(g, o, k)] [k × b bits] per edge, canonical order
//! ```
//!
//! The rank is the combinatorial-number-system index `Σ_i C(s_i, i + 1)` of the
//! sorted support `s`. Values are IEEE-754 binary32 (`b = 32`) or binary64
//! (`b = 64`). The trailing byte is zero-padded.

use super::{binomial, position_bits, CodecError, SparseSet};
use crate::scalar::Scalar;

pub const HEADER_FIELDS: usize = 5;
pub const HEADER_BITS: u64 = 32 * HEADER_FIELDS as u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadHeader {
    pub grid: u32,
    pub order: u32,
    pub retained: u32,
    pub round: u32,
    pub client: u32,
}

/// One client's sparse upload together with its bit accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePayload<T> {
    header: PayloadHeader,
    bits_per_coeff: u32,
    alphas: Vec<T>,
    edges: Vec<SparseSet<T>>,
    payload_bits: u64,
    position_bits: u64,
    total_bits: u64,
}

impl<T: Scalar> SparsePayload<T> {
    pub fn new(
        header: PayloadHeader,
        bits_per_coeff: u32,
        alphas: Vec<T>,
        edges: Vec<SparseSet<T>>,
    ) -> Result<Self, CodecError> {
        if bits_per_coeff != 32 && bits_per_coeff != 64 {
            return Err(CodecError::UnsupportedWidth(bits_per_coeff));
        }
        if alphas.len() != edges.len() {
            return Err(CodecError::Corrupt(format!("{} alphas for {} edges", alphas.len(), edges.len())));
        }
        let n = (header.grid + header.order) as usize;
        let k = header.retained as usize;
        let pb = position_bits(header.grid as usize, header.order as usize, k)? as u64;
        for e in &edges {
            if e.len() != k {
                return Err(CodecError::Corrupt(format!("edge keeps {} coefficients, header says {k}", e.len())));
            }
            // Re-validate ordering and bounds.
            SparseSet::new(e.indices().to_vec(), e.values().to_vec(), n)?;
        }
        let b = bits_per_coeff as u64;
        let count = edges.len() as u64;
        Ok(Self {
            header,
            bits_per_coeff,
            payload_bits: b * k as u64 * count,
            position_bits: pb * count,
            total_bits: b * k as u64 * count + pb * count + b * count,
            alphas,
            edges,
        })
    }

    pub fn header(&self) -> PayloadHeader {
        self.header
    }

    pub fn bits_per_coeff(&self) -> u32 {
        self.bits_per_coeff
    }

    pub fn alphas(&self) -> &[T] {
        &self.alphas
    }

    pub fn edges(&self) -> &[SparseSet<T>] {
        &self.edges
    }

    /// `k · b` bits per edge.
    pub fn payload_bits(&self) -> u64 {
        self.payload_bits
    }

    /// `position_bits(g, o, k)` per edge.
    pub fn position_bits(&self) -> u64 {
        self.position_bits
    }

    /// `payload_bits + position_bits + b · C0`; the header is not counted.
    pub fn total_bits(&self) -> u64 {
        self.total_bits
    }
}

#[derive(Debug, Default)]
struct BitWriter {
    bytes: Vec<u8>,
    len: u64,
}

impl BitWriter {
    fn write(&mut self, value: u128, bits: u32) {
        debug_assert!(bits == 128 || value >> bits == 0);
        for i in (0..bits).rev() {
            if self.len.is_multiple_of(8) {
                self.bytes.push(0);
            }
            if (value >> i) & 1 == 1 {
                *self.bytes.last_mut().unwrap() |= 0x80 >> (self.len % 8);
            }
            self.len += 1;
        }
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl BitReader<'_> {
    fn read(&mut self, bits: u32) -> Result<u128, CodecError> {
        if self.pos + bits as u64 > self.bytes.len() as u64 * 8 {
            return Err(CodecError::Truncated);
        }
        let mut v = 0u128;
        for _ in 0..bits {
            let bit = (self.bytes[(self.pos / 8) as usize] >> (7 - self.pos % 8)) & 1;
            v = (v << 1) | bit as u128;
            self.pos += 1;
        }
        Ok(v)
    }
}

/// Encoded upload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPayload {
    pub bytes: Vec<u8>,
    /// Significant bits in `bytes`, header included.
    pub bit_len: u64,
}

impl EncodedPayload {
    /// Bits after the header; equals [`SparsePayload::total_bits`].
    pub fn body_bits(&self) -> u64 {
        self.bit_len - HEADER_BITS
    }
}

/// Combinatorial-number-system rank of a strictly increasing support.
pub fn rank(support: &[usize]) -> Result<u128, CodecError> {
    support.iter().enumerate().try_fold(0u128, |acc, (i, &s)| {
        let c = binomial(s, i + 1).ok_or(CodecError::RankOverflow { n: s })?;
        Ok(acc + c)
    })
}

/// Inverse of [`rank`] for `k`-subsets of `0..n`.
pub fn unrank(mut r: u128, n: usize, k: usize) -> Result<Vec<usize>, CodecError> {
    let total = binomial(n, k).ok_or(CodecError::RankOverflow { n })?;
    if r >= total {
        return Err(CodecError::Corrupt(format!("rank {r} >= C({n},{k}) = {total}")));
    }
    let mut out = vec![0; k];
    let mut c = n;
    for i in (1..=k).rev() {
        // Largest c with C(c, i) <= r.
        c -= 1;
        while binomial(c, i).expect("bounded by C(n,k)") > r {
            c -= 1;
        }
        r -= binomial(c, i).unwrap();
        out[i - 1] = c;
    }
    Ok(out)
}

fn value_bits<T: Scalar>(v: T, b: u32) -> u128 {
    match b {
        32 => (v.as_f64() as f32).to_bits() as u128,
        _ => v.as_f64().to_bits() as u128,
    }
}

fn bits_value<T: Scalar>(raw: u128, b: u32) -> T {
    match b {
        32 => T::lit(f32::from_bits(raw as u32) as f64),
        _ => T::lit(f64::from_bits(raw as u64)),
    }
}

pub fn encode<T: Scalar>(payload: &SparsePayload<T>) -> Result<EncodedPayload, CodecError> {
    let h = payload.header;
    let b = payload.bits_per_coeff;
    let pb = position_bits(h.grid as usize, h.order as usize, h.retained as usize)?;
    let mut w = BitWriter::default();
    for field in [h.grid, h.order, h.retained, h.round, h.client] {
        w.write(field as u128, 32);
    }
    for &a in &payload.alphas {
        w.write(value_bits(a, b), b);
    }
    for e in &payload.edges {
        w.write(rank(e.indices())?, pb);
        for &v in e.values() {
            w.write(value_bits(v, b), b);
        }
    }
    Ok(EncodedPayload { bytes: w.bytes, bit_len: w.len })
}

/// Shape a receiver knows independently of the bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WireShape {
    pub bits_per_coeff: u32,
    pub edges: usize,
}

/// Decodes a payload, checking the header against the expected `(g, o, k)`.
pub fn decode<T: Scalar>(
    bytes: &[u8],
    grid: usize,
    order: usize,
    k: usize,
    shape: WireShape,
) -> Result<SparsePayload<T>, CodecError> {
    let b = shape.bits_per_coeff;
    if b != 32 && b != 64 {
        return Err(CodecError::UnsupportedWidth(b));
    }
    let mut r = BitReader { bytes, pos: 0 };
    let mut fields = [0u32; HEADER_FIELDS];
    for f in &mut fields {
        *f = r.read(32)? as u32;
    }
    let header = PayloadHeader { grid: fields[0], order: fields[1], retained: fields[2], round: fields[3], client: fields[4] };
    if (header.grid as usize, header.order as usize, header.retained as usize) != (grid, order, k) {
        return Err(CodecError::HeaderMismatch {
            expected: (grid, order, k),
            got: (header.grid as usize, header.order as usize, header.retained as usize),
        });
    }
    let n = grid + order;
    let pb = position_bits(grid, order, k)?;
    let alphas = (0..shape.edges).map(|_| r.read(b).map(|raw| bits_value(raw, b))).collect::<Result<Vec<T>, _>>()?;
    let mut edges = Vec::with_capacity(shape.edges);
    for _ in 0..shape.edges {
        let support = unrank(r.read(pb)?, n, k)?;
        let values = (0..k).map(|_| r.read(b).map(|raw| bits_value(raw, b))).collect::<Result<Vec<T>, _>>()?;
        edges.push(SparseSet::new(support, values, n)?);
    }
    SparsePayload::new(header, b, alphas, edges)
}
