//! Uplink bit accounting and the budget-constrained retention solver.

use statrs::function::gamma::ln_gamma;

use super::CodecError;
use crate::kan::ParamLayout;

/// Largest `g + o` for which [`position_bits`] uses exact integer binomials.
pub const EXACT_BINOMIAL_LIMIT: usize = 64;

/// Bit-cost parameters of one client upload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostModel {
    bits_per_coeff: u32,
    fixed_overhead: u64,
    omegas: Vec<u64>,
    order: usize,
}

impl CostModel {
    pub fn new(bits_per_coeff: u32, fixed_overhead: u64, omegas: Vec<u64>, order: usize) -> Result<Self, CodecError> {
        if bits_per_coeff == 0 {
            return Err(CodecError::InvalidCostModel("bits_per_coeff must be >= 1".into()));
        }
        if omegas.is_empty() || omegas.contains(&0) {
            return Err(CodecError::InvalidCostModel(format!("edge counts {omegas:?} must be positive")));
        }
        Ok(Self { bits_per_coeff, fixed_overhead, omegas, order })
    }

    /// Cost model of a network layout; the fixed overhead counts one α per edge.
    pub fn for_layout(layout: &ParamLayout, bits_per_coeff: u32) -> Result<Self, CodecError> {
        let omegas: Vec<u64> = layout.omegas().iter().map(|&w| w as u64).collect();
        let c0 = omegas.iter().sum();
        Self::new(bits_per_coeff, c0, omegas, layout.order())
    }

    pub fn bits_per_coeff(&self) -> u32 {
        self.bits_per_coeff
    }

    pub fn fixed_overhead(&self) -> u64 {
        self.fixed_overhead
    }

    pub fn omegas(&self) -> &[u64] {
        &self.omegas
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `Σ_i ω_i`.
    pub fn edges(&self) -> u64 {
        self.omegas.iter().sum()
    }
}

/// Dense upload cost `b · (C0 + Σ_i ω_i · g)`.
pub fn uplink_cost(grid: usize, cm: &CostModel) -> u64 {
    cm.bits_per_coeff as u64 * (cm.fixed_overhead + cm.edges() * grid as u64)
}

/// Budget matching the dense size of a grid-`reference_grid` model.
pub fn match_grid_budget(reference_grid: usize, cm: &CostModel) -> u64 {
    uplink_cost(reference_grid, cm)
}

/// `C(n, k)` if it fits in a `u128`.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        let num = (n - i) as u128;
        let den = (i + 1) as u128;
        let g = gcd(acc, den);
        let (a, d) = (acc / g, den / g);
        acc = a.checked_mul(num / d)?;
        debug_assert_eq!(num % d, 0);
    }
    Some(acc)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn ceil_log2(v: u128) -> u32 {
    if v <= 1 {
        0
    } else {
        128 - (v - 1).leading_zeros()
    }
}

/// `log2 C(n, k)` from log-gamma.
pub fn log2_binomial(n: usize, k: usize) -> f64 {
    (ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)) / std::f64::consts::LN_2
}

/// Bits identifying which `k` of the `g + o` coefficients of one edge are kept:
/// `ceil(log2 C(g + o, k))`.
pub fn position_bits(grid: usize, order: usize, k: usize) -> Result<u32, CodecError> {
    let n = grid + order;
    if k > n {
        return Err(CodecError::RetainedOutOfRange { k, n });
    }
    if k == 0 || k == n {
        return Ok(0);
    }
    if n <= EXACT_BINOMIAL_LIMIT {
        let c = binomial(n, k).expect("C(64, k) fits in u128");
        return Ok(ceil_log2(c));
    }
    let lg = log2_binomial(n, k);
    let nearest = lg.round();
    // Log-gamma carries ~1e-11 absolute error here; exact powers of two must not round up.
    let bits = if (lg - nearest).abs() < 1e-9 { nearest } else { lg.ceil() };
    Ok(bits as u32)
}

/// Cost of a sparse upload keeping `k` coefficients per edge:
/// `b · (C0 + k Σ ω_i) + Σ ω_i · position_bits(g, o, k)`.
pub fn sparse_cost(grid: usize, k: usize, cm: &CostModel) -> Result<u64, CodecError> {
    let pos = position_bits(grid, cm.order, k)? as u64;
    Ok(cm.bits_per_coeff as u64 * (cm.fixed_overhead + k as u64 * cm.edges()) + cm.edges() * pos)
}

/// Retention decided for one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityPlan {
    pub retained_per_edge: usize,
    /// `k / g`.
    pub ratio: f64,
    pub grid: usize,
    /// [`sparse_cost`] of the plan.
    pub total_bits: u64,
}

/// Largest `k ∈ {0..g}` whose [`sparse_cost`] fits `budget`.
///
/// The cost is not monotone in `k` (position bits peak at `k ≈ (g+o)/2`), so every
/// candidate is checked from `g` downwards.
pub fn solve_ratio(grid: usize, cm: &CostModel, budget: u64) -> Result<SparsityPlan, CodecError> {
    if grid == 0 {
        return Err(CodecError::InvalidCostModel("grid must be >= 1".into()));
    }
    for k in (0..=grid).rev() {
        let cost = sparse_cost(grid, k, cm)?;
        if cost <= budget {
            return Ok(SparsityPlan {
                retained_per_edge: k,
                ratio: k as f64 / grid as f64,
                grid,
                total_bits: cost,
            });
        }
    }
    Err(CodecError::InfeasibleBudget { budget, minimum: sparse_cost(grid, 0, cm)? })
}
