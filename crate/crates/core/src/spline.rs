//! B-spline bases on uniform extended knot vectors, spline-edge activations and
//! grid extension by least-squares refitting.
//!
//! A [`GridSpec`] of order `o` (polynomial degree) with `g` intervals over `[a, b]`
//! uses `g + 2o + 1` equally spaced knots: the `g + 1` grid points plus `o` extra
//! knots on each side at the same spacing. The `g + o` basis functions then form a
//! partition of unity on `[a, b]` and taper to zero across the extension spans.

use thiserror::Error;

use crate::linalg::Cholesky;
use crate::scalar::{silu, silu_derivative, Scalar};

/// Highest supported spline order.
pub const MAX_ORDER: usize = 5;

/// Ridge term added to the refit normal equations.
pub const REFIT_RIDGE: f64 = 1e-8;

/// Refit samples per basis function.
pub const REFIT_SAMPLES_PER_BASIS: usize = 4;

const REFIT_REFINEMENT_STEPS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite spline input {0}")]
    NonFiniteInput(f64),
    #[error("coefficient vector has length {got}, grid expects {expected}")]
    CoeffLength { expected: usize, got: usize },
    #[error("non-finite edge parameter")]
    NonFiniteParameter,
    #[error("grid extension must grow the grid: current {current}, requested {requested}")]
    NotAnExtension { current: usize, requested: usize },
    #[error("refit normal equations are not positive definite")]
    SingularFit,
}

/// Knot layout for one spline edge.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<T> {
    order: usize,
    grid: usize,
    lo: T,
    hi: T,
    knots: Vec<T>,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(order: usize, grid: usize, lo: T, hi: T) -> Result<Self, SplineError> {
        if order == 0 || order > MAX_ORDER {
            return Err(SplineError::InvalidGrid(format!(
                "order {order} outside 1..={MAX_ORDER}"
            )));
        }
        if grid == 0 {
            return Err(SplineError::InvalidGrid("grid must have at least one interval".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(SplineError::InvalidGrid(format!("domain [{lo}, {hi}] is not a finite interval")));
        }
        let mut spec = Self { order, grid, lo, hi, knots: Vec::new() };
        spec.knots = (0..grid + 2 * order + 1).map(|j| spec.knot(j as isize)).collect();
        Ok(spec)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn domain(&self) -> (T, T) {
        (self.lo, self.hi)
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    /// Number of basis functions, `g + o`.
    pub fn basis_count(&self) -> usize {
        self.grid + self.order
    }

    pub fn step(&self) -> T {
        (self.hi - self.lo) / T::from_usize_lossy(self.grid)
    }

    /// Knot `j` of the infinite uniform sequence this grid is cut from; `knots()[j] == knot(j)`.
    fn knot(&self, j: isize) -> T {
        let offset = T::from_isize(j - self.order as isize).expect("knot offset representable");
        self.lo + offset * self.step()
    }

    /// Same order and domain with a different interval count.
    pub fn with_grid(&self, grid: usize) -> Result<Self, SplineError> {
        Self::new(self.order, grid, self.lo, self.hi)
    }

    /// Index `i` with `t_i <= x < t_{i+1}`, or `None` outside `[t_0, t_last)`.
    fn span(&self, x: T) -> Option<usize> {
        let last = self.knots.len() - 1;
        if x < self.knots[0] || x >= self.knots[last] {
            return None;
        }
        let guess = ((x - self.knots[0]) / self.step()).floor().to_usize().unwrap_or(0);
        let mut i = guess.min(last - 1);
        while i > 0 && x < self.knots[i] {
            i -= 1;
        }
        while i + 1 < last && x >= self.knots[i + 1] {
            i += 1;
        }
        Some(i)
    }

    /// The `o + 1` possibly nonzero basis values (and their derivatives) at `x`.
    ///
    /// Entry `r` belongs to basis `first + r`; entries whose index falls outside
    /// `0..basis_count()` must be ignored by callers (see [`LocalBasis::iter`]).
    pub fn local_basis(&self, x: T) -> Option<LocalBasis<T>> {
        let i = self.span(x)? as isize;
        let o = self.order;
        let mut n = [T::zero(); MAX_ORDER + 1];
        let mut prev = [T::zero(); MAX_ORDER + 1];
        let mut left = [T::zero(); MAX_ORDER + 1];
        let mut right = [T::zero(); MAX_ORDER + 1];
        n[0] = T::one();
        for j in 1..=o {
            left[j] = x - self.knot(i + 1 - j as isize);
            right[j] = self.knot(i + j as isize) - x;
            if j == o {
                prev = n;
            }
            let mut saved = T::zero();
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        // d/dx B_{p,o} = o (B_{p,o-1} / (t_{p+o} - t_p) - B_{p+1,o-1} / (t_{p+o+1} - t_{p+1})),
        // where prev[r] holds B_{i-o+1+r, o-1}.
        let first = i - o as isize;
        let scale = T::from_usize_lossy(o);
        let mut d = [T::zero(); MAX_ORDER + 1];
        for (r, slot) in d.iter_mut().enumerate().take(o + 1) {
            let p = first + r as isize;
            let lower = if r >= 1 {
                prev[r - 1] / (self.knot(p + o as isize) - self.knot(p))
            } else {
                T::zero()
            };
            let upper = if r < o {
                prev[r] / (self.knot(p + o as isize + 1) - self.knot(p + 1))
            } else {
                T::zero()
            };
            *slot = scale * (lower - upper);
        }
        Some(LocalBasis { first, len: o + 1, count: self.basis_count(), values: n, derivatives: d })
    }
}

/// Nonzero window of the basis at one point.
#[derive(Debug, Clone, Copy)]
pub struct LocalBasis<T> {
    first: isize,
    len: usize,
    count: usize,
    values: [T; MAX_ORDER + 1],
    derivatives: [T; MAX_ORDER + 1],
}

impl<T: Scalar> LocalBasis<T> {
    /// `(basis index, value, derivative)` for every in-range basis function of the window.
    pub fn iter(&self) -> impl Iterator<Item = (usize, T, T)> + '_ {
        (0..self.len).filter_map(move |r| {
            let p = self.first + r as isize;
            (p >= 0 && (p as usize) < self.count).then(|| (p as usize, self.values[r], self.derivatives[r]))
        })
    }

    pub fn dot(&self, coeffs: &[T]) -> T {
        self.iter().fold(T::zero(), |acc, (p, b, _)| acc + coeffs[p] * b)
    }

    pub fn dot_derivative(&self, coeffs: &[T]) -> T {
        self.iter().fold(T::zero(), |acc, (p, _, db)| acc + coeffs[p] * db)
    }
}

fn check_finite<T: Scalar>(x: T) -> Result<(), SplineError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(SplineError::NonFiniteInput(x.to_f64().unwrap_or(f64::NAN)))
    }
}

/// `[B_0(x), …, B_{g+o-1}(x)]`; all zeros outside the knot support.
pub fn basis_eval<T: Scalar>(x: T, grid: &GridSpec<T>) -> Result<Vec<T>, SplineError> {
    check_finite(x)?;
    let mut out = vec![T::zero(); grid.basis_count()];
    if let Some(local) = grid.local_basis(x) {
        for (p, b, _) in local.iter() {
            out[p] = b;
        }
    }
    Ok(out)
}

/// `[B'_0(x), …, B'_{g+o-1}(x)]`.
pub fn basis_derivative<T: Scalar>(x: T, grid: &GridSpec<T>) -> Result<Vec<T>, SplineError> {
    check_finite(x)?;
    let mut out = vec![T::zero(); grid.basis_count()];
    if let Some(local) = grid.local_basis(x) {
        for (p, _, db) in local.iter() {
            out[p] = db;
        }
    }
    Ok(out)
}

/// One learnable activation `α·x·σ(x) + Σ c_p B_p(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineEdge<T> {
    base: T,
    coeffs: Vec<T>,
    grid: GridSpec<T>,
}

impl<T: Scalar> SplineEdge<T> {
    pub fn new(base: T, coeffs: Vec<T>, grid: GridSpec<T>) -> Result<Self, SplineError> {
        if coeffs.len() != grid.basis_count() {
            return Err(SplineError::CoeffLength { expected: grid.basis_count(), got: coeffs.len() });
        }
        if !base.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(SplineError::NonFiniteParameter);
        }
        Ok(Self { base, coeffs, grid })
    }

    pub fn zeros(grid: GridSpec<T>) -> Self {
        Self { base: T::zero(), coeffs: vec![T::zero(); grid.basis_count()], grid }
    }

    pub fn base(&self) -> T {
        self.base
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub(crate) fn set_base(&mut self, base: T) {
        self.base = base;
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    /// `Σ c_p B_p(x)` without the SiLU term.
    pub fn spline_term(&self, x: T) -> T {
        self.grid.local_basis(x).map_or(T::zero(), |lb| lb.dot(&self.coeffs))
    }
}

/// `α·x·σ(x) + dot(c, basis_eval(x))`.
pub fn activation_eval<T: Scalar>(x: T, edge: &SplineEdge<T>) -> Result<T, SplineError> {
    check_finite(x)?;
    Ok(edge.base * silu(x) + edge.spline_term(x))
}

/// `dφ/dx`.
pub fn activation_derivative<T: Scalar>(x: T, edge: &SplineEdge<T>) -> Result<T, SplineError> {
    check_finite(x)?;
    let spline = edge.grid.local_basis(x).map_or(T::zero(), |lb| lb.dot_derivative(&edge.coeffs));
    Ok(edge.base * silu_derivative(x) + spline)
}

/// Equispaced sample abscissae used by [`extend_grid`] for a target grid.
pub fn refit_samples<T: Scalar>(grid: &GridSpec<T>) -> Vec<T> {
    let m = REFIT_SAMPLES_PER_BASIS * grid.basis_count();
    let (lo, hi) = grid.domain();
    let denom = T::from_usize_lossy(m - 1);
    (0..m).map(|s| lo + (hi - lo) * T::from_usize_lossy(s) / denom).collect()
}

/// Least-squares coefficients on `grid` for samples `(xs[s], ys[s])`.
///
/// The normal equations carry a ridge term of [`REFIT_RIDGE`]; its bias is removed by a
/// few iterated-Tikhonov steps on the same factorization.
pub fn fit_coefficients<T: Scalar>(grid: &GridSpec<T>, xs: &[T], ys: &[T]) -> Result<Vec<T>, SplineError> {
    assert_eq!(xs.len(), ys.len());
    let n = grid.basis_count();
    let mut normal = vec![T::zero(); n * n];
    let mut rhs = vec![T::zero(); n];
    for (&x, &y) in xs.iter().zip(ys) {
        check_finite(x)?;
        let Some(local) = grid.local_basis(x) else { continue };
        let window: Vec<(usize, T)> = local.iter().map(|(p, b, _)| (p, b)).collect();
        for &(p, bp) in &window {
            rhs[p] += bp * y;
            for &(q, bq) in &window {
                normal[p * n + q] += bp * bq;
            }
        }
    }
    let ridge = T::lit(REFIT_RIDGE);
    for p in 0..n {
        normal[p * n + p] += ridge;
    }
    let chol = Cholesky::factor(n, &normal).ok_or(SplineError::SingularFit)?;
    let mut coeffs = chol.solve(&rhs);
    for _ in 0..REFIT_REFINEMENT_STEPS {
        let shifted: Vec<T> = rhs.iter().zip(&coeffs).map(|(&r, &c)| r + ridge * c).collect();
        coeffs = chol.solve(&shifted);
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(SplineError::SingularFit);
    }
    Ok(coeffs)
}

/// Refits the spline term of `edge` onto a finer grid with `new_grid` intervals.
pub fn extend_grid<T: Scalar>(edge: &SplineEdge<T>, new_grid: usize) -> Result<SplineEdge<T>, SplineError> {
    let current = edge.grid.grid();
    if new_grid <= current {
        return Err(SplineError::NotAnExtension { current, requested: new_grid });
    }
    let target = edge.grid.with_grid(new_grid)?;
    let xs = refit_samples(&target);
    let ys: Vec<T> = xs.iter().map(|&x| edge.spline_term(x)).collect();
    let coeffs = fit_coefficients(&target, &xs, &ys)?;
    SplineEdge::new(edge.base, coeffs, target)
}
