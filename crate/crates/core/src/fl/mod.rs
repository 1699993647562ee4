//! Federated simulation: client sampling, scheduled grid growth, budget-aware
//! uploads and uniform aggregation.

mod round;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::codec::{CodecError, SparsityPlan};
use crate::data::DataError;
use crate::kan::{KanError, KanNetwork, KanSpec, ParamLayout, ParamVector, TrainConfig};
use crate::seed::{derive_indexed, derive_seed};

pub use round::{run_experiment, run_round, ExperimentOutcome, ServerState};

#[derive(Debug, Error)]
pub enum FlError {
    #[error("invalid federated configuration: {0}")]
    InvalidConfig(String),
    #[error("round {round}, client {client}: {source}")]
    Client { round: usize, client: usize, source: KanError },
    #[error("update layout {got:#x} does not match the reference {expected:#x}")]
    LayoutMismatch { expected: u64, got: u64 },
    #[error("round {round}: {bits} measured bits exceed the {budget}-bit budget")]
    BudgetExceeded { round: usize, bits: u64, budget: u64 },
    #[error("no updates to aggregate")]
    NoUpdates,
    #[error(transparent)]
    Model(#[from] KanError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("metrics sink: {0}")]
    Sink(#[from] std::io::Error),
}

/// `g(t) = g0 + Σ_{j ≤ ⌊t / period⌋} δ_j`, saturating once the deltas run out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSchedule {
    pub g0: usize,
    pub period: usize,
    pub deltas: Vec<usize>,
}

impl GridSchedule {
    pub fn fixed(g: usize) -> Self {
        Self { g0: g, period: 1, deltas: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), FlError> {
        if self.g0 == 0 || self.period == 0 || self.deltas.contains(&0) {
            return Err(FlError::InvalidConfig(format!("schedule {self:?} needs g0, period and deltas >= 1")));
        }
        Ok(())
    }

    pub fn grid_size_at(&self, t: usize) -> usize {
        let steps = (t / self.period).min(self.deltas.len());
        self.g0 + self.deltas[..steps].iter().sum::<usize>()
    }

    /// Largest grid the schedule ever reaches.
    pub fn final_grid(&self) -> usize {
        self.g0 + self.deltas.iter().sum::<usize>()
    }
}

/// Support selector applied to each edge when the budget is exceeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Selector {
    #[default]
    TopK,
    Random,
    Fixed,
    Optimal,
}

/// How dropped coefficients enter the average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FillRule {
    /// Dropped coefficients take the broadcast value; every client counts equally.
    #[default]
    Broadcast,
    /// Each coefficient is averaged over the clients that sent it; unsent
    /// coefficients keep the broadcast value.
    SenderWeighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlConfig {
    pub num_clients: usize,
    pub rounds: usize,
    pub participation: f64,
    pub train: TrainConfig,
    /// When set, the local learning rate decays geometrically from
    /// `train.learning_rate` in round 0 towards this value in round `rounds`.
    pub final_learning_rate: Option<f64>,
    /// Per-client uplink budget in bits; `None` never sparsifies.
    pub budget: Option<u64>,
    pub bits_per_coeff: u32,
    pub selector: Selector,
    pub fill: FillRule,
    /// Drives client sampling, local shuffles and random selection.
    pub seed: u64,
    /// Drives the initial global model only.
    pub init_seed: u64,
}

impl Default for FlConfig {
    fn default() -> Self {
        Self {
            num_clients: 20,
            rounds: 200,
            participation: 0.1,
            train: TrainConfig::default(),
            final_learning_rate: None,
            budget: None,
            bits_per_coeff: 32,
            selector: Selector::TopK,
            fill: FillRule::Broadcast,
            seed: 0,
            init_seed: 0,
        }
    }
}

impl FlConfig {
    pub fn validate(&self) -> Result<(), FlError> {
        if self.num_clients == 0 || self.rounds == 0 {
            return Err(FlError::InvalidConfig("num_clients and rounds must be >= 1".into()));
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return Err(FlError::InvalidConfig(format!("participation {} must lie in (0, 1]", self.participation)));
        }
        if self.bits_per_coeff != 32 && self.bits_per_coeff != 64 {
            return Err(FlError::InvalidConfig(format!("bits_per_coeff {} must be 32 or 64", self.bits_per_coeff)));
        }
        self.train.validate()?;
        if let Some(lr) = self.final_learning_rate {
            if !(lr > 0.0 && lr.is_finite() && self.train.learning_rate > 0.0) {
                return Err(FlError::InvalidConfig(format!(
                    "final_learning_rate {lr} needs a positive start and end rate"
                )));
            }
        }
        Ok(())
    }

    /// Local learning rate in round `t`.
    pub fn learning_rate_at(&self, t: usize) -> f64 {
        let lr0 = self.train.learning_rate;
        match self.final_learning_rate {
            Some(lr1) => lr0 * (lr1 / lr0).powf(t as f64 / self.rounds as f64),
            None => lr0,
        }
    }

    /// Training configuration of `client` in round `t`.
    pub fn client_train(&self, t: usize, client: usize) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate_at(t),
            seed: derive_indexed(derive_seed(self.seed, "train"), &[t as u64, client as u64]),
            ..self.train.clone()
        }
    }
}

/// `round(fraction · N)` distinct clients, at least one, sorted by id.
pub fn sample_clients(t: usize, num_clients: usize, participation: f64, seed: u64) -> Vec<usize> {
    let m = ((participation * num_clients as f64).round() as usize).clamp(1, num_clients);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_indexed(derive_seed(seed, "sampling"), &[t as u64]));
    let mut ids = rand::seq::index::sample(&mut rng, num_clients, m).into_vec();
    ids.sort_unstable();
    ids
}

/// Global model every run starts from.
pub fn initial_model(widths: Vec<usize>, order: usize, grid: usize, init_seed: u64) -> Result<KanNetwork<f64>, FlError> {
    let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
    Ok(KanNetwork::random(KanSpec::new(widths, order, grid), &mut rng)?)
}

/// What one round reports.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    pub round: usize,
    pub grid: usize,
    /// The broadcast model was extended to `grid` this round.
    pub extended: bool,
    /// Sampled client ids, ascending.
    pub clients: Vec<usize>,
    /// Uplink bits of each sampled client, header excluded. Sparse rounds report
    /// the encoded size; dense rounds the dense cost.
    pub client_bits: Vec<u64>,
    pub budget: Option<u64>,
    /// Present when the budget forced sparsification.
    pub plan: Option<SparsityPlan>,
    /// Test RMSE of the aggregated model.
    pub rmse: f64,
    /// Mean over sampled clients of the final local-epoch loss.
    pub train_loss: f64,
}

impl RoundMetrics {
    /// Largest single-client upload this round.
    pub fn bits_per_client(&self) -> u64 {
        self.client_bits.iter().copied().max().unwrap_or(0)
    }

    /// Retained fraction `k / g`; 1 for dense rounds.
    pub fn ratio(&self) -> f64 {
        self.plan.map_or(1.0, |p| p.ratio)
    }
}

/// A client's densified update.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpload {
    pub client: usize,
    pub values: ParamVector<f64>,
    /// Coordinates actually transmitted; `None` for a dense upload.
    pub sent: Option<Vec<bool>>,
    /// Bits on the wire, header excluded.
    pub bits: u64,
}

fn check_layout(layout: &ParamLayout, reference: &ParamLayout) -> Result<(), FlError> {
    if layout != reference {
        return Err(FlError::LayoutMismatch { expected: reference.fingerprint(), got: layout.fingerprint() });
    }
    Ok(())
}

/// Coordinatewise mean of the uploads, summed in the order given.
pub fn aggregate(uploads: &[ClientUpload], reference: &ParamVector<f64>, rule: FillRule) -> Result<ParamVector<f64>, FlError> {
    let first = uploads.first().ok_or(FlError::NoUpdates)?;
    for u in uploads {
        check_layout(&u.values.layout, &reference.layout)?;
    }
    let values = match rule {
        FillRule::Broadcast => {
            let mut acc = first.values.values.clone();
            for u in &uploads[1..] {
                for (a, v) in acc.iter_mut().zip(&u.values.values) {
                    *a += v;
                }
            }
            let n = uploads.len() as f64;
            acc.iter().map(|a| a / n).collect()
        }
        FillRule::SenderWeighted => {
            let len = reference.values.len();
            let mut acc = vec![0.0; len];
            let mut count = vec![0u32; len];
            for u in uploads {
                for i in 0..len {
                    if u.sent.as_ref().is_none_or(|m| m[i]) {
                        acc[i] += u.values.values[i];
                        count[i] += 1;
                    }
                }
            }
            (0..len).map(|i| if count[i] == 0 { reference.values[i] } else { acc[i] / count[i] as f64 }).collect()
        }
    };
    Ok(ParamVector { values, layout: reference.layout.clone() })
}
