//! Codec benchmarks: sparsification error versus retained ratio, and the
//! top-k error bound check.

use std::fmt::Write as _;

use fedkan::codec::{
    fixed_sparsify, optimal_sparsify, random_sparsify, topk_sparsify, BoundReport, SplineErrorMetric, ORACLE_MAX_COEFFS,
};
use fedkan::seed::{derive_indexed, derive_seed};
use fedkan::spline::GridSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::CliError;

/// Ratios swept by `codec-bench`; `k = round(ratio · g)`.
pub const RATIOS: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

pub const BENCH_HEADER: &str = "ratio,k,topk,random,fixed,optimal";

/// Mean spline-space error of each selector at one retained count.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    /// `None` for the row that keeps all `g + o` coefficients.
    pub ratio: Option<f64>,
    pub k: usize,
    pub topk: f64,
    pub random: f64,
    pub fixed: f64,
    pub optimal: f64,
}

/// Averages errors over `draws` standard-normal coefficient vectors, the same
/// draws for every row.
pub fn codec_bench(g: usize, order: usize, draws: usize, seed: u64) -> Result<Vec<BenchRow>, CliError> {
    if g == 0 || !(1..=4).contains(&order) {
        return Err(CliError::Config(format!("need g >= 1 and order in 1..=4, got g = {g}, order = {order}")));
    }
    if g + order > ORACLE_MAX_COEFFS {
        return Err(CliError::Config(format!("g + order = {} exceeds the oracle limit {ORACLE_MAX_COEFFS}", g + order)));
    }
    if draws == 0 {
        return Err(CliError::Config("draws must be positive".into()));
    }
    let n = g + order;
    let grid = GridSpec::new(order, g, -1.0, 1.0).map_err(|e| CliError::Config(e.to_string()))?;
    let metric = SplineErrorMetric::new(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "draws"));
    let vectors: Vec<Vec<f64>> = (0..draws).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let random_seed = derive_seed(seed, "random");

    let mut plan: Vec<(Option<f64>, usize)> = RATIOS.iter().map(|&r| (Some(r), (r * g as f64).round() as usize)).collect();
    plan.push((None, n));
    let mut rows = Vec::with_capacity(plan.len());
    for (ratio, k) in plan {
        let mut sums = [0.0; 4];
        for (d, c) in vectors.iter().enumerate() {
            sums[0] += metric.error(c, &topk_sparsify(c, k)?);
            sums[1] += metric.error(c, &random_sparsify(c, k, derive_indexed(random_seed, &[d as u64, k as u64]))?);
            sums[2] += metric.error(c, &fixed_sparsify(c, k)?);
            sums[3] += optimal_sparsify(c, k, &metric)?.error;
        }
        let m = sums.map(|s| s / draws as f64);
        rows.push(BenchRow { ratio, k, topk: m[0], random: m[1], fixed: m[2], optimal: m[3] });
    }
    Ok(rows)
}

pub fn render_bench(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in rows {
        let ratio = r.ratio.map_or_else(|| "full".to_string(), |v| format!("{v:.1}"));
        let _ = writeln!(out, "{ratio},{},{},{},{},{}", r.k, r.topk, r.random, r.fixed, r.optimal);
    }
    out
}

pub fn render_bound(report: &BoundReport) -> String {
    let mut out = format!(
        "trials {}  skipped (zero optimal error) {}  violations {}\n",
        report.trials, report.skipped, report.violations
    );
    out.push_str("order,trials,max_ratio,bound\n");
    for s in &report.per_order {
        let _ = writeln!(out, "{},{},{},{}", s.order, s.trials, s.max_ratio, s.bound);
    }
    let _ = writeln!(out, "max ratio {} vs bound {}", report.max_ratio_observed, report.bound);
    out
}
