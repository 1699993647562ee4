//! Single experiment runs and their output files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fedkan::data::prepare_split;
use fedkan::fl::{initial_model, run_experiment, ExperimentOutcome, RoundMetrics};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Seeds};
use crate::CliError;

pub const METRICS_HEADER: &str = "round,grid,bits_total,bits_budget,rho,rmse,train_loss";

/// Runs `cfg` in memory, handing every round to `sink` as it completes.
pub fn execute<F>(cfg: &ExperimentConfig, sink: F) -> Result<ExperimentOutcome, CliError>
where
    F: FnMut(&RoundMetrics) -> std::io::Result<()>,
{
    cfg.validate()?;
    let benchmark = cfg.benchmark()?;
    let fl = cfg.fl_config()?;
    let schedule = cfg.schedule();
    let data = prepare_split(benchmark, &cfg.split_config())?;
    let initial = initial_model(benchmark.widths(), cfg.grid.order, schedule.g0, fl.init_seed)?;
    Ok(run_experiment(&fl, &schedule, &data, initial, sink)?)
}

/// One metrics row. `bits_total` is the per-client upload and `bits_budget`
/// is empty for unlimited modes.
pub fn metrics_row(m: &RoundMetrics) -> String {
    let budget = m.budget.map(|b| b.to_string()).unwrap_or_default();
    format!("{},{},{},{},{},{},{}", m.round, m.grid, m.bits_per_client(), budget, m.ratio(), m.rmse, m.train_loss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub final_rmse: f64,
    pub best_rmse: f64,
    pub final_grid: usize,
    pub rounds: usize,
    pub sparse_rounds: usize,
    /// Uplink bits summed over all clients and rounds.
    pub total_bits: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_bits: Option<u64>,
}

impl RunResult {
    pub fn from_metrics(metrics: &[RoundMetrics]) -> Self {
        Self {
            final_rmse: metrics.last().map_or(f64::NAN, |m| m.rmse),
            best_rmse: metrics.iter().map(|m| m.rmse).fold(f64::INFINITY, f64::min),
            final_grid: metrics.last().map_or(0, |m| m.grid),
            rounds: metrics.len(),
            sparse_rounds: metrics.iter().filter(|m| m.plan.is_some()).count(),
            total_bits: metrics.iter().flat_map(|m| &m.client_bits).sum(),
            budget_bits: metrics.first().and_then(|m| m.budget),
        }
    }
}

/// Contents of `<name>.summary.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub result: RunResult,
    pub seeds: Seeds,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct RunFiles {
    pub metrics: PathBuf,
    pub summary: PathBuf,
}

impl RunFiles {
    pub fn new(out_dir: &Path, name: &str) -> Self {
        Self {
            metrics: out_dir.join(format!("{name}.metrics.csv")),
            summary: out_dir.join(format!("{name}.summary.toml")),
        }
    }
}

/// Runs `cfg` and writes the metrics file (flushed after every round) and the
/// summary into `out_dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(RunSummary, RunFiles), CliError> {
    fs::create_dir_all(out_dir).map_err(CliError::io(format!("creating {}", out_dir.display())))?;
    let files = RunFiles::new(out_dir, &cfg.name());
    let file = File::create(&files.metrics).map_err(CliError::io(format!("creating {}", files.metrics.display())))?;
    let mut csv = BufWriter::new(file);
    writeln!(csv, "{METRICS_HEADER}")
        .and_then(|_| csv.flush())
        .map_err(CliError::io(format!("writing {}", files.metrics.display())))?;

    let outcome = execute(cfg, |m| {
        writeln!(csv, "{}", metrics_row(m))?;
        csv.flush()
    })?;

    let summary = RunSummary { result: RunResult::from_metrics(&outcome.metrics), seeds: cfg.seeds(), config: cfg.clone() };
    let text = toml::to_string(&summary).expect("summary serializes");
    fs::write(&files.summary, text).map_err(CliError::io(format!("writing {}", files.summary.display())))?;
    Ok((summary, files))
}
