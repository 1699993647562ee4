//! Experiment configuration.
//!
//! A config file is TOML with the sections below. Every key has a default, so
//! an empty file is a valid (full-scale) experiment. Keys the file leaves out
//! are taken from the full-scale or desk-scale defaults before deserializing,
//! which lets the echoed config in a run summary reproduce the run exactly;
//! a summary file is itself accepted as a config.

use std::fmt;
use std::path::Path;

use fedkan::codec::{match_grid_budget, CostModel};
use fedkan::data::{Benchmark, Heterogeneity, PartitionConfig, SplitConfig, DEFAULT_BINS};
use fedkan::fl::{initial_model, FillRule, FlConfig, GridSchedule, Selector};
use fedkan::kan::{OptimizerKind, TrainConfig};
use fedkan::seed::derive_seed;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Constant grid `grid.fixed`, dense uploads.
    FixedGrid,
    /// Grid schedule, dense uploads.
    GridExtended,
    /// Grid schedule with budget-driven top-k sparsification.
    CompressedGrid,
    SparsifyRandom,
    SparsifyFixed,
    SparsifyOptimal,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::FixedGrid,
        Mode::GridExtended,
        Mode::CompressedGrid,
        Mode::SparsifyRandom,
        Mode::SparsifyFixed,
        Mode::SparsifyOptimal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::FixedGrid => "fixed-grid",
            Mode::GridExtended => "grid-extended",
            Mode::CompressedGrid => "compressed-grid",
            Mode::SparsifyRandom => "sparsify-random",
            Mode::SparsifyFixed => "sparsify-fixed",
            Mode::SparsifyOptimal => "sparsify-optimal",
        }
    }

    fn selector(self) -> Option<Selector> {
        match self {
            Mode::FixedGrid | Mode::GridExtended => None,
            Mode::CompressedGrid => Some(Selector::TopK),
            Mode::SparsifyRandom => Some(Selector::Random),
            Mode::SparsifyFixed => Some(Selector::Fixed),
            Mode::SparsifyOptimal => Some(Selector::Optimal),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionKind {
    Dirichlet,
    Iid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fill {
    Broadcast,
    SenderWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetRule {
    /// Budget equals the dense upload of a grid-`match_grid` model.
    MatchGrid,
    /// Budget is `bits` per client per round.
    Bits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Output file stem; derived from benchmark, mode and seed when empty.
    pub name: String,
    pub benchmark: String,
    pub mode: Mode,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub train_samples: usize,
    pub test_samples: usize,
    pub partition: PartitionKind,
    pub alpha: f64,
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlSection {
    pub clients: usize,
    pub rounds: usize,
    pub participation: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Geometric decay target for the last round; 0 disables decay.
    pub final_learning_rate: f64,
    pub optimizer: Optimizer,
    pub bits_per_coeff: u32,
    pub fill: Fill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub order: usize,
    /// Grid of the fixed-grid mode.
    pub fixed: usize,
    pub initial: usize,
    pub period: usize,
    pub deltas: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    pub rule: BudgetRule,
    pub match_grid: usize,
    pub bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub benchmarks: Vec<String>,
    pub modes: Vec<Mode>,
    pub alphas: Vec<f64>,
    /// Fixed grids tried by the fixed-grid mode; the best one is reported.
    pub fixed_grids: Vec<usize>,
    /// Replicate `r` runs with seed `experiment.seed + r`.
    pub replicates: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub data: DataSection,
    pub fl: FlSection,
    pub grid: GridSection,
    pub budget: BudgetSection,
    pub sweep: SweepSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::full_scale()
    }
}

impl ExperimentConfig {
    /// The published experimental protocol.
    pub fn full_scale() -> Self {
        Self {
            experiment: ExperimentSection {
                name: String::new(),
                benchmark: Benchmark::FeynmanI30_3.name().into(),
                mode: Mode::CompressedGrid,
                seed: 0,
            },
            data: DataSection {
                train_samples: 30_000,
                test_samples: 3_000,
                partition: PartitionKind::Dirichlet,
                alpha: 1.0,
                bins: DEFAULT_BINS,
            },
            fl: FlSection {
                clients: 100,
                rounds: 1000,
                participation: 0.1,
                local_epochs: 5,
                batch_size: 32,
                learning_rate: 1e-2,
                final_learning_rate: 0.0,
                optimizer: Optimizer::Adam,
                bits_per_coeff: 32,
                fill: Fill::Broadcast,
            },
            grid: GridSection { order: 3, fixed: 10, initial: 3, period: 200, deltas: vec![2, 7, 27, 47] },
            budget: BudgetSection { rule: BudgetRule::MatchGrid, match_grid: 10, bits: 0 },
            sweep: SweepSection {
                benchmarks: Benchmark::ALL.iter().map(|b| b.name().to_string()).collect(),
                modes: vec![Mode::FixedGrid, Mode::GridExtended, Mode::CompressedGrid],
                alphas: vec![0.1, 1.0, 10.0],
                fixed_grids: vec![3, 5, 10, 30, 50, 100],
                replicates: 1,
            },
        }
    }

    /// Scaled-down protocol that runs in minutes on one core.
    pub fn desk_scale() -> Self {
        let mut cfg = Self::full_scale();
        cfg.experiment.benchmark = Benchmark::FeynmanI37_4.name().into();
        cfg.data.train_samples = 3_000;
        cfg.data.test_samples = 500;
        cfg.fl.clients = 20;
        cfg.fl.rounds = 200;
        cfg.fl.participation = 0.5;
        cfg.fl.local_epochs = 10;
        cfg.fl.learning_rate = 2e-2;
        cfg.fl.final_learning_rate = 1e-3;
        cfg.grid.period = 50;
        cfg.grid.deltas = vec![2, 7];
        cfg.sweep.fixed_grids = vec![3, 5, 10];
        cfg.sweep.replicates = 3;
        cfg
    }

    /// Parses `text` over the chosen defaults.
    pub fn from_toml(text: &str, desk_scale: bool) -> Result<Self, CliError> {
        let base = if desk_scale { Self::desk_scale() } else { Self::full_scale() };
        let mut overrides: toml::Table =
            text.parse().map_err(|e: toml::de::Error| CliError::Config(e.message().into()))?;
        // A run summary carries its full config under `[config]`.
        if overrides.contains_key("result") {
            if let Some(toml::Value::Table(echo)) = overrides.remove("config") {
                overrides = echo;
            }
        }
        let mut merged = toml::Table::try_from(&base).map_err(|e| CliError::Config(e.to_string()))?;
        merge(&mut merged, overrides, "")?;
        let cfg: Self = toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| CliError::Config(e.message().into()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, desk_scale: bool) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, desk_scale)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn benchmark(&self) -> Result<Benchmark, CliError> {
        Benchmark::from_name(&self.experiment.benchmark)
            .map_err(|_| CliError::Config(format!("experiment.benchmark: unknown benchmark {:?}", self.experiment.benchmark)))
    }

    /// Checks every field that the core crates would otherwise reject deep
    /// inside a run, and names it.
    pub fn validate(&self) -> Result<(), CliError> {
        fn bad(field: &str, why: impl fmt::Display) -> Result<(), CliError> {
            Err(CliError::Config(format!("{field}: {why}")))
        }
        self.benchmark()?;
        if self.experiment.seed > i64::MAX as u64 {
            return bad("experiment.seed", format!("{} does not fit a TOML integer", self.experiment.seed));
        }
        for name in &self.sweep.benchmarks {
            if Benchmark::from_name(name).is_err() {
                return bad("sweep.benchmarks", format!("unknown benchmark {name:?}"));
            }
        }
        let (d, f, g) = (&self.data, &self.fl, &self.grid);
        if d.test_samples == 0 {
            return bad("data.test_samples", "must be positive");
        }
        if d.train_samples < f.clients {
            return bad("data.train_samples", format!("{} is fewer than fl.clients = {}", d.train_samples, f.clients));
        }
        if d.partition == PartitionKind::Dirichlet && !(d.alpha > 0.0 && d.alpha.is_finite()) {
            return bad("data.alpha", format!("{} is not a positive concentration", d.alpha));
        }
        if d.bins == 0 {
            return bad("data.bins", "must be positive");
        }
        if f.clients == 0 {
            return bad("fl.clients", "must be positive");
        }
        if f.rounds == 0 {
            return bad("fl.rounds", "must be positive");
        }
        if !(f.participation > 0.0 && f.participation <= 1.0) {
            return bad("fl.participation", format!("{} is outside (0, 1]", f.participation));
        }
        if f.local_epochs == 0 {
            return bad("fl.local_epochs", "must be positive");
        }
        if f.batch_size == 0 {
            return bad("fl.batch_size", "must be positive");
        }
        if !(f.learning_rate > 0.0 && f.learning_rate.is_finite()) {
            return bad("fl.learning_rate", format!("{} is not positive", f.learning_rate));
        }
        if !(f.final_learning_rate >= 0.0 && f.final_learning_rate.is_finite()) {
            return bad("fl.final_learning_rate", format!("{} is negative", f.final_learning_rate));
        }
        if f.bits_per_coeff != 32 && f.bits_per_coeff != 64 {
            return bad("fl.bits_per_coeff", format!("{} is not 32 or 64", f.bits_per_coeff));
        }
        if !(1..=4).contains(&g.order) {
            return bad("grid.order", format!("{} is outside 1..=4", g.order));
        }
        if g.fixed == 0 {
            return bad("grid.fixed", "must be positive");
        }
        if g.initial == 0 {
            return bad("grid.initial", "must be positive");
        }
        if !g.deltas.is_empty() && g.period == 0 {
            return bad("grid.period", "must be positive when grid.deltas is set");
        }
        if self.budget.rule == BudgetRule::MatchGrid && self.budget.match_grid == 0 {
            return bad("budget.match_grid", "must be positive");
        }
        if self.sweep.modes.is_empty() {
            return bad("sweep.modes", "must not be empty");
        }
        if self.sweep.replicates == 0 {
            return bad("sweep.replicates", "must be positive");
        }
        if self.sweep.modes.contains(&Mode::FixedGrid) && self.sweep.fixed_grids.contains(&0) {
            return bad("sweep.fixed_grids", "grids must be positive");
        }
        if let Some(a) = self.sweep.alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return bad("sweep.alphas", format!("{a} is not a positive concentration"));
        }
        Ok(())
    }

    /// Output file stem.
    pub fn name(&self) -> String {
        if !self.experiment.name.is_empty() {
            return self.experiment.name.clone();
        }
        let mode = match self.experiment.mode {
            Mode::FixedGrid => format!("fixed-grid-{}", self.grid.fixed),
            m => m.name().to_string(),
        };
        format!("{}_{}_s{}", self.experiment.benchmark, mode, self.experiment.seed)
    }

    pub fn seeds(&self) -> Seeds {
        let m = self.experiment.seed;
        Seeds {
            master: m,
            data: derive_seed(m, "data"),
            partition: derive_seed(m, "partition"),
            init: derive_seed(m, "init"),
            fl: derive_seed(m, "fl"),
        }
    }

    pub fn schedule(&self) -> GridSchedule {
        match self.experiment.mode {
            Mode::FixedGrid => GridSchedule::fixed(self.grid.fixed),
            _ => GridSchedule { g0: self.grid.initial, period: self.grid.period, deltas: self.grid.deltas.clone() },
        }
    }

    pub fn split_config(&self) -> SplitConfig {
        let seeds = self.seeds();
        let heterogeneity = match self.data.partition {
            PartitionKind::Dirichlet => Heterogeneity::Dirichlet(self.data.alpha),
            PartitionKind::Iid => Heterogeneity::Iid,
        };
        SplitConfig {
            train_samples: self.data.train_samples,
            test_samples: self.data.test_samples,
            clients: self.fl.clients,
            partition: PartitionConfig { heterogeneity, num_bins: self.data.bins, seed: seeds.partition },
            data_seed: seeds.data,
        }
    }

    /// Per-client per-round uplink budget in bits, if the mode has one.
    pub fn budget_bits(&self) -> Result<Option<u64>, CliError> {
        if self.experiment.mode.selector().is_none() {
            return Ok(None);
        }
        Ok(Some(match self.budget.rule {
            BudgetRule::Bits => self.budget.bits,
            BudgetRule::MatchGrid => {
                let net = initial_model(self.benchmark()?.widths(), self.grid.order, 1, 0)?;
                let cm = CostModel::for_layout(&net.layout(), self.fl.bits_per_coeff)?;
                match_grid_budget(self.budget.match_grid, &cm)
            }
        }))
    }

    pub fn fl_config(&self) -> Result<FlConfig, CliError> {
        let seeds = self.seeds();
        let f = &self.fl;
        Ok(FlConfig {
            num_clients: f.clients,
            rounds: f.rounds,
            participation: f.participation,
            train: TrainConfig {
                learning_rate: f.learning_rate,
                local_epochs: f.local_epochs,
                batch_size: f.batch_size,
                optimizer: match f.optimizer {
                    Optimizer::Adam => OptimizerKind::AdaptiveMoment,
                    Optimizer::Sgd => OptimizerKind::PlainGradient,
                },
                seed: 0,
            },
            final_learning_rate: (f.final_learning_rate > 0.0).then_some(f.final_learning_rate),
            budget: self.budget_bits()?,
            bits_per_coeff: f.bits_per_coeff,
            selector: self.experiment.mode.selector().unwrap_or(Selector::TopK),
            fill: match f.fill {
                Fill::Broadcast => FillRule::Broadcast,
                Fill::SenderWeighted => FillRule::SenderWeighted,
            },
            seed: seeds.fl,
            init_seed: seeds.init,
        })
    }
}

/// Named sub-seeds of one master seed. Derived seeds use all 64 bits, so they
/// are written as hex strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    #[serde(with = "hex_u64")]
    pub data: u64,
    #[serde(with = "hex_u64")]
    pub partition: u64,
    #[serde(with = "hex_u64")]
    pub init: u64,
    #[serde(with = "hex_u64")]
    pub fl: u64,
}

mod hex_u64 {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:#018x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let text = String::deserialize(d)?;
        let digits = text.strip_prefix("0x").ok_or_else(|| D::Error::custom("expected 0x prefix"))?;
        u64::from_str_radix(digits, 16).map_err(D::Error::custom)
    }
}

fn merge(base: &mut toml::Table, overrides: toml::Table, prefix: &str) -> Result<(), CliError> {
    for (key, value) in overrides {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        let Some(slot) = base.get_mut(&key) else {
            return Err(CliError::Config(format!("{path}: unknown key")));
        };
        match (slot, value) {
            (toml::Value::Table(inner), toml::Value::Table(sub)) => merge(inner, sub, &path)?,
            // Floats written as integers, e.g. `alpha = 1`.
            (slot @ toml::Value::Float(_), toml::Value::Integer(i)) => *slot = toml::Value::Float(i as f64),
            (slot, value) if std::mem::discriminant(slot) == std::mem::discriminant(&value) => *slot = value,
            (slot, value) => {
                return Err(CliError::Config(format!(
                    "{path}: expected {}, found {}",
                    slot.type_str(),
                    value.type_str()
                )))
            }
        }
    }
    Ok(())
}
