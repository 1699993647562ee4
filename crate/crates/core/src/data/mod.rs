//! Analytic regression benchmarks, client partitioning and evaluation.

mod cache;
mod functions;
mod partition;

use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::kan::{KanError, KanNetwork, Sample};

pub use cache::{load_or_generate, read_dataset_cache, write_dataset_cache, CACHE_VERSION};
pub use functions::{bessel_j, eval_benchmark, legendre_p};
pub use partition::{bin_of_targets, dirichlet_partition, Heterogeneity, PartitionConfig, DEFAULT_BINS};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{benchmark}: {detail}")]
    Domain { benchmark: &'static str, detail: String },
    #[error("expected {expected} inputs, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("unknown benchmark {0:?}")]
    UnknownBenchmark(String),
    #[error("cannot split {samples} samples across {clients} clients")]
    TooFewSamples { samples: usize, clients: usize },
    #[error("no partition with every client non-empty after {0} draws")]
    PartitionFailed(usize),
    #[error("invalid data configuration: {0}")]
    InvalidConfig(String),
    #[error("evaluation set is empty")]
    EmptyEvaluationSet,
    #[error("dataset cache: {0}")]
    Io(#[from] io::Error),
    #[error("dataset cache is invalid: {0}")]
    BadCache(String),
    #[error(transparent)]
    Model(#[from] KanError),
}

/// Sampling range of one input dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputRange {
    Continuous(f64, f64),
    /// Inclusive integer range.
    Integer(i64, i64),
}

impl InputRange {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            InputRange::Continuous(lo, hi) => (lo, hi),
            InputRange::Integer(lo, hi) => (lo as f64, hi as f64),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            InputRange::Continuous(lo, hi) => rng.random_range(lo..=hi),
            InputRange::Integer(lo, hi) => rng.random_range(lo..=hi) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Benchmark {
    /// `I0 · sin²(nθ/2) / sin²(θ/2)` over `(I0, n, θ)`.
    FeynmanI30_3,
    /// `I1 + I2 + 2√(I1 I2) cos δ` over `(I1, I2, δ)`.
    FeynmanI37_4,
    /// `J_ν(x)` over `(ν, x)`.
    Bessel,
    /// `P_n(z)` over `(n, z)`.
    Legendre,
}

const I30_3_RANGES: [InputRange; 3] =
    [InputRange::Continuous(1.0, 5.0), InputRange::Continuous(1.0, 5.0), InputRange::Continuous(0.5, 3.0)];
const I37_4_RANGES: [InputRange; 3] = [
    InputRange::Continuous(1.0, 5.0),
    InputRange::Continuous(1.0, 5.0),
    InputRange::Continuous(0.0, std::f64::consts::TAU),
];
const BESSEL_RANGES: [InputRange; 2] = [InputRange::Continuous(0.0, 2.0), InputRange::Continuous(0.0, 10.0)];
const LEGENDRE_RANGES: [InputRange; 2] = [InputRange::Integer(1, 6), InputRange::Continuous(-1.0, 1.0)];

impl Benchmark {
    pub const ALL: [Benchmark; 4] =
        [Benchmark::FeynmanI30_3, Benchmark::FeynmanI37_4, Benchmark::Bessel, Benchmark::Legendre];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::FeynmanI30_3 => "feynman-I.30.3",
            Benchmark::FeynmanI37_4 => "feynman-I.37.4",
            Benchmark::Bessel => "bessel",
            Benchmark::Legendre => "legendre",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, DataError> {
        Self::ALL.into_iter().find(|b| b.name() == name).ok_or_else(|| DataError::UnknownBenchmark(name.into()))
    }

    /// Stable numeric id used in cache files.
    pub fn id(self) -> u32 {
        Self::ALL.iter().position(|&b| b == self).unwrap() as u32
    }

    pub fn input_dim(self) -> usize {
        self.ranges().len()
    }

    pub fn ranges(self) -> &'static [InputRange] {
        match self {
            Benchmark::FeynmanI30_3 => &I30_3_RANGES,
            Benchmark::FeynmanI37_4 => &I37_4_RANGES,
            Benchmark::Bessel => &BESSEL_RANGES,
            Benchmark::Legendre => &LEGENDRE_RANGES,
        }
    }

    /// Layer widths of the model used for this benchmark.
    pub fn widths(self) -> Vec<usize> {
        match self {
            Benchmark::FeynmanI30_3 => vec![3, 5, 5, 1],
            Benchmark::FeynmanI37_4 => vec![3, 3, 2, 1],
            Benchmark::Bessel => vec![2, 2, 2, 1],
            Benchmark::Legendre => vec![2, 2, 1],
        }
    }
}

impl std::fmt::Display for Benchmark {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Benchmark {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_name(s)
    }
}

/// Unnormalized samples of one benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub benchmark: Benchmark,
    pub seed: u64,
    pub samples: Vec<Sample<f64>>,
}

/// Draws `n_samples` inputs uniformly from the benchmark's box and evaluates targets.
pub fn generate_dataset(benchmark: Benchmark, n_samples: usize, seed: u64) -> Result<RawDataset, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n_samples)
        .map(|_| {
            let x: Vec<f64> = benchmark.ranges().iter().map(|r| r.sample(&mut rng)).collect();
            let y = eval_benchmark(benchmark, &x)?;
            Ok(Sample::new(x, vec![y]))
        })
        .collect::<Result<_, DataError>>()?;
    Ok(RawDataset { benchmark, seed, samples })
}

/// Per-dimension affine map of the training inputs onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl Normalizer {
    pub fn fit(samples: &[Sample<f64>]) -> Result<Self, DataError> {
        let first = samples.first().ok_or(DataError::EmptyEvaluationSet)?;
        let d = first.x.len();
        let mut mins = vec![f64::INFINITY; d];
        let mut maxs = vec![f64::NEG_INFINITY; d];
        for s in samples {
            if s.x.len() != d {
                return Err(DataError::Arity { expected: d, got: s.x.len() });
            }
            for (k, &v) in s.x.iter().enumerate() {
                mins[k] = mins[k].min(v);
                maxs[k] = maxs[k].max(v);
            }
        }
        Ok(Self { mins, maxs })
    }

    /// Constant dimensions map to 0.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mins.iter().zip(&self.maxs))
            .map(|(&v, (&lo, &hi))| if hi > lo { 2.0 * (v - lo) / (hi - lo) - 1.0 } else { 0.0 })
            .collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mins.iter().zip(&self.maxs))
            .map(|(&v, (&lo, &hi))| if hi > lo { lo + (v + 1.0) * 0.5 * (hi - lo) } else { lo })
            .collect()
    }
}

/// Client training shards and a shared test set, inputs normalized, targets raw.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub benchmark: Benchmark,
    pub clients: Vec<Vec<Sample<f64>>>,
    pub test: Vec<Sample<f64>>,
    pub normalizer: Normalizer,
}

impl SplitDataset {
    /// Union of all client shards, in client order.
    pub fn pooled_train(&self) -> Vec<Sample<f64>> {
        self.clients.iter().flatten().cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitConfig {
    pub train_samples: usize,
    pub test_samples: usize,
    pub clients: usize,
    pub partition: PartitionConfig,
    pub data_seed: u64,
}

/// Generates `test + train` samples, holds out the first `test_samples`, fits the
/// normalizer on the remainder and partitions it across clients.
pub fn prepare_split(benchmark: Benchmark, cfg: &SplitConfig) -> Result<SplitDataset, DataError> {
    let raw = generate_dataset(benchmark, cfg.test_samples + cfg.train_samples, cfg.data_seed)?;
    split_raw(&raw, cfg)
}

pub fn split_raw(raw: &RawDataset, cfg: &SplitConfig) -> Result<SplitDataset, DataError> {
    if raw.samples.len() != cfg.test_samples + cfg.train_samples {
        return Err(DataError::InvalidConfig(format!(
            "dataset has {} samples, configuration expects {}",
            raw.samples.len(),
            cfg.test_samples + cfg.train_samples
        )));
    }
    let (test_raw, train_raw) = raw.samples.split_at(cfg.test_samples);
    let normalizer = Normalizer::fit(train_raw)?;
    let norm = |s: &Sample<f64>| Sample::new(normalizer.normalize(&s.x), s.y.clone());
    let train: Vec<Sample<f64>> = train_raw.iter().map(norm).collect();
    let test = test_raw.iter().map(norm).collect();
    let shards = dirichlet_partition(&train, cfg.clients, &cfg.partition)?;
    let clients = shards.iter().map(|idx| idx.iter().map(|&i| train[i].clone()).collect()).collect();
    Ok(SplitDataset { benchmark: raw.benchmark, clients, test, normalizer })
}

/// `sqrt(mean (f(x) − y)²)`.
pub fn rmse(net: &KanNetwork<f64>, set: &[Sample<f64>]) -> Result<f64, DataError> {
    if set.is_empty() {
        return Err(DataError::EmptyEvaluationSet);
    }
    Ok(net.loss(set)?.sqrt())
}
