//! Label-skew partitioning for regression targets: samples are binned by target
//! quantile and each bin is split across clients with Dirichlet proportions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use super::DataError;
use crate::kan::Sample;

pub const DEFAULT_BINS: usize = 10;
const MAX_DRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Heterogeneity {
    Iid,
    /// Concentration `α` of `Dir(α · 1_N)`; smaller is more skewed.
    Dirichlet(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionConfig {
    pub heterogeneity: Heterogeneity,
    pub num_bins: usize,
    pub seed: u64,
}

impl PartitionConfig {
    pub fn dirichlet(alpha: f64, seed: u64) -> Self {
        Self { heterogeneity: Heterogeneity::Dirichlet(alpha), num_bins: DEFAULT_BINS, seed }
    }

    pub fn iid(seed: u64) -> Self {
        Self { heterogeneity: Heterogeneity::Iid, num_bins: DEFAULT_BINS, seed }
    }

    fn validate(&self) -> Result<(), DataError> {
        if let Heterogeneity::Dirichlet(a) = self.heterogeneity {
            if !(a > 0.0 && a.is_finite()) {
                return Err(DataError::InvalidConfig(format!("dirichlet alpha {a} must be positive")));
            }
        }
        if self.num_bins < 2 {
            return Err(DataError::InvalidConfig(format!("{} bins; need at least 2", self.num_bins)));
        }
        Ok(())
    }
}

/// Quantile bin of every sample's first target: sorted positions are cut into
/// `num_bins` equal runs, ties broken by index.
pub fn bin_of_targets(samples: &[Sample<f64>], num_bins: usize) -> Vec<usize> {
    let n = samples.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| samples[a].y[0].total_cmp(&samples[b].y[0]).then(a.cmp(&b)));
    let mut bins = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        bins[i] = rank * num_bins / n.max(1);
    }
    bins
}

/// Splits sample indices across `clients` shards. Every shard is non-empty; the
/// shards are disjoint and cover `0..samples.len()`.
pub fn dirichlet_partition(
    samples: &[Sample<f64>],
    clients: usize,
    cfg: &PartitionConfig,
) -> Result<Vec<Vec<usize>>, DataError> {
    cfg.validate()?;
    if clients == 0 || samples.len() < clients {
        return Err(DataError::TooFewSamples { samples: samples.len(), clients });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let alpha = match cfg.heterogeneity {
        Heterogeneity::Iid => {
            let mut idx: Vec<usize> = (0..samples.len()).collect();
            idx.shuffle(&mut rng);
            let mut shards = vec![Vec::new(); clients];
            for (pos, i) in idx.into_iter().enumerate() {
                shards[pos % clients].push(i);
            }
            return Ok(sorted(shards));
        }
        Heterogeneity::Dirichlet(a) => a,
    };
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| DataError::InvalidConfig(e.to_string()))?;

    let bins = bin_of_targets(samples, cfg.num_bins);
    let mut by_bin = vec![Vec::new(); cfg.num_bins];
    for (i, &b) in bins.iter().enumerate() {
        by_bin[b].push(i);
    }
    let fair_share = samples.len() as f64 / clients as f64;

    for _ in 0..MAX_DRAWS {
        let mut shards: Vec<Vec<usize>> = vec![Vec::new(); clients];
        for members in &by_bin {
            let mut members = members.clone();
            members.shuffle(&mut rng);
            let mut p: Vec<f64> = (0..clients).map(|_| gamma.sample(&mut rng)).collect();
            // Clients already holding their fair share take no more of this bin.
            for (pj, shard) in p.iter_mut().zip(&shards) {
                if shard.len() as f64 >= fair_share {
                    *pj = 0.0;
                }
            }
            let total: f64 = p.iter().sum();
            if !(total > 0.0 && total.is_finite()) {
                let open: Vec<usize> =
                    (0..clients).filter(|&j| (shards[j].len() as f64) < fair_share).collect();
                let j = if open.is_empty() { rng.random_range(0..clients) } else { open[rng.random_range(0..open.len())] };
                shards[j].extend(members);
                continue;
            }
            let mut start = 0;
            let mut cum = 0.0;
            for (j, pj) in p.iter().enumerate() {
                cum += pj / total;
                let end = if j + 1 == clients { members.len() } else { ((cum * members.len() as f64).round() as usize).min(members.len()) };
                let end = end.max(start);
                shards[j].extend_from_slice(&members[start..end]);
                start = end;
            }
        }
        if shards.iter().all(|s| !s.is_empty()) {
            return Ok(sorted(shards));
        }
    }
    Err(DataError::PartitionFailed(MAX_DRAWS))
}

fn sorted(mut shards: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for s in &mut shards {
        s.sort_unstable();
    }
    shards
}
