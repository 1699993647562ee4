//! Support selection: magnitude top-k, the exhaustive spline-space oracle, and
//! the random and fixed baselines.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::CodecError;
use crate::scalar::Scalar;
use crate::spline::{basis_eval, GridSpec};

/// Largest `g + o` accepted by [`optimal_sparsify`].
pub const ORACLE_MAX_COEFFS: usize = 24;

/// Number of equispaced domain points behind [`SplineErrorMetric`].
pub const METRIC_POINTS: usize = 256;

/// Retained coefficients of one edge, indices strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSet<T> {
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseSet<T> {
    pub fn new(indices: Vec<usize>, values: Vec<T>, len: usize) -> Result<Self, CodecError> {
        if indices.len() != values.len() {
            return Err(CodecError::Corrupt(format!("{} indices for {} values", indices.len(), values.len())));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CodecError::Corrupt(format!("indices {indices:?} are not strictly increasing")));
        }
        if let Some(&last) = indices.last() {
            if last >= len {
                return Err(CodecError::Corrupt(format!("index {last} outside an edge of {len}")));
            }
        }
        Ok(Self { indices, values })
    }

    /// Keeps `c` on `support` (which must be sorted and unique).
    pub fn from_support(c: &[T], support: Vec<usize>) -> Self {
        debug_assert!(support.windows(2).all(|w| w[0] < w[1]));
        let values = support.iter().map(|&p| c[p]).collect();
        Self { indices: support, values }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Dense vector of length `len` with zeros off the support.
    pub fn densify(&self, len: usize) -> Vec<T> {
        let mut out = vec![T::zero(); len];
        self.scatter_into(&mut out);
        out
    }

    /// Overwrites the supported entries of `target`.
    pub fn scatter_into(&self, target: &mut [T]) {
        for (&p, &v) in self.indices.iter().zip(&self.values) {
            target[p] = v;
        }
    }

    /// Support as a membership mask of length `len`.
    pub fn mask(&self, len: usize) -> Vec<bool> {
        let mut m = vec![false; len];
        for &p in &self.indices {
            m[p] = true;
        }
        m
    }
}

fn check_k(k: usize, n: usize) -> Result<(), CodecError> {
    if k > n {
        Err(CodecError::RetainedOutOfRange { k, n })
    } else {
        Ok(())
    }
}

/// The `k` entries of largest magnitude; ties go to the lower index.
pub fn topk_sparsify<T: Scalar>(c: &[T], k: usize) -> Result<SparseSet<T>, CodecError> {
    check_k(k, c.len())?;
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        c[b].abs().partial_cmp(&c[a].abs()).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let mut support = order[..k].to_vec();
    support.sort_unstable();
    Ok(SparseSet::from_support(c, support))
}

/// The first `k` coefficients.
pub fn fixed_sparsify<T: Scalar>(c: &[T], k: usize) -> Result<SparseSet<T>, CodecError> {
    check_k(k, c.len())?;
    Ok(SparseSet::from_support(c, (0..k).collect()))
}

/// A uniformly random support of size `k`.
pub fn random_sparsify<T: Scalar>(c: &[T], k: usize, seed: u64) -> Result<SparseSet<T>, CodecError> {
    check_k(k, c.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut support = rand::seq::index::sample(&mut rng, c.len(), k).into_vec();
    support.sort_unstable();
    Ok(SparseSet::from_support(c, support))
}

/// Discretized functional L2 norm of a coefficient difference: `‖Φ d‖₂` with
/// `Φ` the basis matrix at [`METRIC_POINTS`] equispaced points of the domain.
#[derive(Debug, Clone)]
pub struct SplineErrorMetric<T> {
    n: usize,
    /// `ΦᵀΦ`, row-major.
    gram: Vec<T>,
}

impl<T: Scalar> SplineErrorMetric<T> {
    pub fn new(grid: &GridSpec<T>) -> Self {
        let n = grid.basis_count();
        let (lo, hi) = grid.domain();
        let mut gram = vec![T::zero(); n * n];
        for s in 0..METRIC_POINTS {
            let x = lo + (hi - lo) * T::from_usize_lossy(s) / T::from_usize_lossy(METRIC_POINTS - 1);
            let row = basis_eval(x, grid).expect("domain points are finite");
            for i in 0..n {
                if row[i] == T::zero() {
                    continue;
                }
                for j in 0..n {
                    gram[i * n + j] += row[i] * row[j];
                }
            }
        }
        Self { n, gram }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `‖Φ d‖₂`.
    pub fn norm(&self, d: &[T]) -> T {
        assert_eq!(d.len(), self.n);
        let mut acc = T::zero();
        for i in 0..self.n {
            if d[i] == T::zero() {
                continue;
            }
            let row = &self.gram[i * self.n..(i + 1) * self.n];
            acc += d[i] * row.iter().zip(d).map(|(&g, &dj)| g * dj).sum::<T>();
        }
        acc.max(T::zero()).sqrt()
    }

    /// Error of keeping `set` of `c` and zeroing the rest.
    pub fn error(&self, c: &[T], set: &SparseSet<T>) -> T {
        let mut d = c.to_vec();
        for &p in set.indices() {
            d[p] = T::zero();
        }
        self.norm(&d)
    }
}

/// Result of the exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome<T> {
    pub set: SparseSet<T>,
    pub error: T,
    /// Supports scored; always `C(g + o, k)`.
    pub supports_evaluated: u64,
}

/// Enumerates every size-`k` support in lexicographic order and keeps the one with
/// the smallest spline-space error; the first minimum wins ties.
pub fn optimal_sparsify<T: Scalar>(
    c: &[T],
    k: usize,
    metric: &SplineErrorMetric<T>,
) -> Result<OracleOutcome<T>, CodecError> {
    let n = c.len();
    if n > ORACLE_MAX_COEFFS {
        return Err(CodecError::OracleTooLarge { n, max: ORACLE_MAX_COEFFS });
    }
    if metric.len() != n {
        return Err(CodecError::Corrupt(format!("metric for {} coefficients, got {n}", metric.len())));
    }
    check_k(k, n)?;

    // Pairwise terms c_i c_j G_ij; the error of a support is the sum over the
    // dropped block.
    let w: Vec<T> = (0..n * n).map(|ij| c[ij / n] * c[ij % n] * metric.gram[ij]).collect();
    let score = |dropped: &[usize]| -> T {
        let mut acc = T::zero();
        for &i in dropped {
            for &j in dropped {
                acc += w[i * n + j];
            }
        }
        acc
    };

    let mut support: Vec<usize> = (0..k).collect();
    let mut dropped = Vec::with_capacity(n - k);
    let mut best: Option<(T, Vec<usize>)> = None;
    let mut evaluated = 0u64;
    loop {
        dropped.clear();
        let mut s = support.iter().peekable();
        for p in 0..n {
            if s.peek() == Some(&&p) {
                s.next();
            } else {
                dropped.push(p);
            }
        }
        let e = score(&dropped);
        evaluated += 1;
        if best.as_ref().is_none_or(|(b, _)| e < *b) {
            best = Some((e, support.clone()));
        }
        if !next_combination(&mut support, n) {
            break;
        }
    }
    let (e2, support) = best.expect("at least one support");
    Ok(OracleOutcome {
        set: SparseSet::from_support(c, support),
        error: e2.max(T::zero()).sqrt(),
        supports_evaluated: evaluated,
    })
}

/// Advances to the next `k`-subset of `0..n` in lexicographic order.
fn next_combination(s: &mut [usize], n: usize) -> bool {
    let k = s.len();
    let Some(i) = (0..k).rev().find(|&i| s[i] < n - k + i) else {
        return false;
    };
    s[i] += 1;
    for j in i + 1..k {
        s[j] = s[j - 1] + 1;
    }
    true
}
