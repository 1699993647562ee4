//! Randomized check that magnitude top-k stays within `o · 2^o` of the spline-space
//! optimum.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{optimal_sparsify, topk_sparsify, CodecError, SplineErrorMetric, ORACLE_MAX_COEFFS};
use crate::spline::{GridSpec, MAX_ORDER};

/// Ratio limit for order `o`.
pub fn bound_for_order(order: usize) -> f64 {
    order as f64 * (1u64 << order) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderStats {
    pub order: usize,
    pub trials: u64,
    pub max_ratio: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub trials: u64,
    /// Trials with `e_opt = 0` (and therefore `e_top = 0`).
    pub skipped: u64,
    pub max_ratio_observed: f64,
    /// `o_max · 2^o_max`.
    pub bound: f64,
    pub violations: u64,
    pub per_order: Vec<OrderStats>,
}

/// `(e_top, e_opt)` for one coefficient vector.
pub fn trial_errors(c: &[f64], k: usize, metric: &SplineErrorMetric<f64>) -> Result<(f64, f64), CodecError> {
    let top = metric.error(c, &topk_sparsify(c, k)?);
    let opt = optimal_sparsify(c, k, metric)?.error;
    Ok((top, opt))
}

/// Draws `trials` instances with `g ∈ 1..=g_max`, `o ∈ 1..=o_max`, `k ∈ 0..g` and
/// standard-normal coefficients on `[-1, 1]`, and counts violations of
/// `e_top < o · 2^o · e_opt`.
pub fn verify_bound(trials: u64, g_max: usize, o_max: usize, seed: u64) -> Result<BoundReport, CodecError> {
    if g_max == 0 || o_max == 0 || o_max > MAX_ORDER || g_max + o_max > ORACLE_MAX_COEFFS {
        return Err(CodecError::OracleTooLarge { n: g_max + o_max, max: ORACLE_MAX_COEFFS });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut metrics: HashMap<(usize, usize), SplineErrorMetric<f64>> = HashMap::new();
    let mut per_order: Vec<OrderStats> = (1..=o_max)
        .map(|o| OrderStats { order: o, trials: 0, max_ratio: 0.0, bound: bound_for_order(o) })
        .collect();
    let (mut skipped, mut violations) = (0u64, 0u64);

    for _ in 0..trials {
        let o = rng.random_range(1..=o_max);
        let g = rng.random_range(1..=g_max);
        let k = rng.random_range(0..g);
        let c: Vec<f64> = (0..g + o).map(|_| rng.sample(StandardNormal)).collect();
        let metric = metrics.entry((g, o)).or_insert_with(|| {
            SplineErrorMetric::new(&GridSpec::new(o, g, -1.0, 1.0).expect("validated ranges"))
        });
        let (top, opt) = trial_errors(&c, k, metric)?;
        let stats = &mut per_order[o - 1];
        stats.trials += 1;
        if opt == 0.0 {
            skipped += 1;
            if top > 0.0 {
                violations += 1;
            }
            continue;
        }
        let ratio = top / opt;
        stats.max_ratio = stats.max_ratio.max(ratio);
        if ratio >= stats.bound {
            violations += 1;
        }
    }
    Ok(BoundReport {
        trials,
        skipped,
        max_ratio_observed: per_order.iter().map(|s| s.max_ratio).fold(0.0, f64::max),
        bound: bound_for_order(o_max),
        violations,
        per_order,
    })
}
