//! Uplink compression of spline coefficients: bit accounting, retention under a
//! budget, support selection and the wire format.

mod bound;
mod cost;
mod select;
mod wire;

use thiserror::Error;

pub use bound::{bound_for_order, trial_errors, verify_bound, BoundReport, OrderStats};
pub use cost::{
    binomial, log2_binomial, match_grid_budget, position_bits, solve_ratio, sparse_cost, uplink_cost, CostModel,
    SparsityPlan, EXACT_BINOMIAL_LIMIT,
};
pub use select::{
    fixed_sparsify, optimal_sparsify, random_sparsify, topk_sparsify, OracleOutcome, SparseSet, SplineErrorMetric,
    METRIC_POINTS, ORACLE_MAX_COEFFS,
};
pub use wire::{
    decode, encode, rank, unrank, EncodedPayload, PayloadHeader, SparsePayload, WireShape, HEADER_BITS,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("invalid cost model: {0}")]
    InvalidCostModel(String),
    #[error("cannot keep {k} of {n} coefficients")]
    RetainedOutOfRange { k: usize, n: usize },
    #[error("budget of {budget} bits is below the {minimum}-bit minimum upload")]
    InfeasibleBudget { budget: u64, minimum: u64 },
    #[error("exhaustive search over {n} coefficients exceeds the limit of {max}; use topk_sparsify")]
    OracleTooLarge { n: usize, max: usize },
    #[error("support rank over {n} coefficients does not fit in 128 bits")]
    RankOverflow { n: usize },
    #[error("unsupported coefficient width {0} (expected 32 or 64)")]
    UnsupportedWidth(u32),
    #[error("header (g, o, k) = {got:?}, expected {expected:?}")]
    HeaderMismatch { expected: (usize, usize, usize), got: (usize, usize, usize) },
    #[error("payload truncated")]
    Truncated,
    #[error("corrupt payload: {0}")]
    Corrupt(String),
}
