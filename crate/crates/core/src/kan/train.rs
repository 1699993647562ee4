//! Local mini-batch training.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{KanError, KanNetwork, Sample};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    /// `w ← w − η ∇f`.
    PlainGradient,
    /// Adam with decay rates 0.9 / 0.999 and ε = 1e-8.
    AdaptiveMoment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            local_epochs: 5,
            batch_size: 32,
            optimizer: OptimizerKind::AdaptiveMoment,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), KanError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(KanError::InvalidConfig(format!("learning_rate {} must be finite and >= 0", self.learning_rate)));
        }
        if self.local_epochs == 0 {
            return Err(KanError::InvalidConfig("local_epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(KanError::InvalidConfig("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub network: KanNetwork<T>,
    /// Full-dataset loss after each epoch.
    pub epoch_losses: Vec<T>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

struct Adam<T> {
    m: Vec<T>,
    v: Vec<T>,
    step: i32,
}

impl<T: Scalar> Adam<T> {
    fn new(n: usize) -> Self {
        Self { m: vec![T::zero(); n], v: vec![T::zero(); n], step: 0 }
    }

    fn apply(&mut self, params: &mut [T], grad: &[T], lr: T) {
        self.step += 1;
        let (b1, b2, eps) = (T::lit(BETA1), T::lit(BETA2), T::lit(EPSILON));
        let c1 = T::one() - b1.powi(self.step);
        let c2 = T::one() - b2.powi(self.step);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// Runs `cfg.local_epochs` shuffled mini-batch passes over `data` starting from `net`.
///
/// Optimizer state is created fresh on every call.
pub fn train_local<T: Scalar>(
    net: &KanNetwork<T>,
    data: &[Sample<T>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>, KanError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(KanError::EmptyBatch);
    }
    let mut network = net.clone();
    let mut params = network.flatten().values;
    let mut adam = Adam::new(params.len());
    let lr = T::lit(cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut last_finite = f64::NAN;
    let mut epoch_losses = Vec::with_capacity(cfg.local_epochs);
    let mut batch = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.local_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&k| data[k].clone()));
            let (loss, grad) = match network.loss_and_gradients(&batch) {
                Ok(v) => v,
                Err(KanError::NonFinite { .. }) => {
                    return Err(KanError::Diverged { epoch, last_finite_loss: last_finite })
                }
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || grad.values.iter().any(|g| !g.is_finite()) {
                return Err(KanError::Diverged { epoch, last_finite_loss: last_finite });
            }
            last_finite = loss.as_f64();
            match cfg.optimizer {
                OptimizerKind::PlainGradient => {
                    for (p, &g) in params.iter_mut().zip(&grad.values) {
                        *p -= lr * g;
                    }
                }
                OptimizerKind::AdaptiveMoment => adam.apply(&mut params, &grad.values, lr),
            }
            if params.iter().any(|p| !p.is_finite()) {
                return Err(KanError::Diverged { epoch, last_finite_loss: last_finite });
            }
            network.assign(&params)?;
        }
        let epoch_loss = match network.loss(data) {
            Ok(l) if l.is_finite() => l,
            Ok(_) | Err(KanError::NonFinite { .. }) => {
                return Err(KanError::Diverged { epoch, last_finite_loss: last_finite })
            }
            Err(e) => return Err(e),
        };
        last_finite = epoch_loss.as_f64();
        epoch_losses.push(epoch_loss);
    }
    Ok(TrainOutcome { network, epoch_losses })
}
