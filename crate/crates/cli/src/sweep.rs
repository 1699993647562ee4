//! Cross-product sweeps over benchmarks, concentrations, modes and seeds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::config::{ExperimentConfig, Mode};
use crate::runner::run_to_dir;
use crate::CliError;

/// One run of the sweep.
#[derive(Debug, Clone)]
pub struct Cell {
    pub benchmark: String,
    pub alpha: f64,
    pub mode: Mode,
    /// Grid of a fixed-grid cell.
    pub fixed_grid: Option<usize>,
    pub replicate: u64,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub outcome: Result<f64, String>,
}

/// A row of the summary table: the median final RMSE over replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub benchmark: String,
    pub alpha: f64,
    /// A mode name, `fixed-grid-<g>`, or `best-fixed`.
    pub mode: String,
    pub grid: Option<usize>,
    pub median_rmse: Option<f64>,
    pub completed: usize,
    pub failed: usize,
}

pub const SUMMARY_HEADER: &str = "benchmark,alpha,mode,grid,median_rmse,completed,failed";

pub fn cells(base: &ExperimentConfig) -> Vec<Cell> {
    let s = &base.sweep;
    let mut out = Vec::new();
    for benchmark in &s.benchmarks {
        for &alpha in &s.alphas {
            for &mode in &s.modes {
                let grids: Vec<Option<usize>> = match mode {
                    Mode::FixedGrid => s.fixed_grids.iter().map(|&g| Some(g)).collect(),
                    _ => vec![None],
                };
                for fixed_grid in grids {
                    for replicate in 0..s.replicates {
                        let mut config = base.clone();
                        config.experiment.benchmark = benchmark.clone();
                        config.experiment.mode = mode;
                        config.experiment.seed = base.experiment.seed.wrapping_add(replicate);
                        config.data.alpha = alpha;
                        if let Some(g) = fixed_grid {
                            config.grid.fixed = g;
                        }
                        config.experiment.name = format!(
                            "{benchmark}_a{alpha}_{}_s{}",
                            mode_label(mode, fixed_grid),
                            config.experiment.seed
                        );
                        out.push(Cell { benchmark: benchmark.clone(), alpha, mode, fixed_grid, replicate, config });
                    }
                }
            }
        }
    }
    out
}

fn mode_label(mode: Mode, fixed_grid: Option<usize>) -> String {
    match fixed_grid {
        Some(g) => format!("{mode}-{g}"),
        None => mode.to_string(),
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Groups results by (benchmark, alpha, mode label) and appends a
/// `best-fixed` row per (benchmark, alpha) holding the fixed grid with the
/// lowest median RMSE.
pub fn summarize(results: &[CellResult]) -> Vec<SummaryRow> {
    let mut pairs: Vec<(String, u64)> = Vec::new();
    let mut groups: BTreeMap<(usize, usize, usize), (SummaryRow, Vec<f64>)> = BTreeMap::new();
    for r in results {
        let c = &r.cell;
        let key = (c.benchmark.clone(), c.alpha.to_bits());
        let pair = pairs.iter().position(|p| *p == key).unwrap_or_else(|| {
            pairs.push(key);
            pairs.len() - 1
        });
        let mode = Mode::ALL.iter().position(|m| *m == c.mode).expect("every mode is listed");
        let (row, rmses) = groups.entry((pair, mode, c.fixed_grid.unwrap_or(0))).or_insert_with(|| {
            let row = SummaryRow {
                benchmark: c.benchmark.clone(),
                alpha: c.alpha,
                mode: mode_label(c.mode, c.fixed_grid),
                grid: c.fixed_grid,
                median_rmse: None,
                completed: 0,
                failed: 0,
            };
            (row, Vec::new())
        });
        match &r.outcome {
            Ok(rmse) => {
                row.completed += 1;
                rmses.push(*rmse);
            }
            Err(_) => row.failed += 1,
        }
    }

    let mut rows = Vec::new();
    for pair in 0..pairs.len() {
        let group: Vec<SummaryRow> = groups
            .range((pair, 0, 0)..(pair + 1, 0, 0))
            .map(|(_, (row, rmses))| SummaryRow { median_rmse: median(rmses.clone()), ..row.clone() })
            .collect();
        let best = group
            .iter()
            .filter(|r| r.grid.is_some())
            .filter_map(|r| r.median_rmse.map(|m| (m, r)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, r)| SummaryRow { mode: "best-fixed".into(), ..r.clone() });
        rows.extend(group);
        rows.extend(best);
    }
    rows
}

pub fn render(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let grid = r.grid.map(|g| g.to_string()).unwrap_or_default();
        let rmse = r.median_rmse.map(|m| m.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{grid},{rmse},{},{}", r.benchmark, r.alpha, r.mode, r.completed, r.failed);
    }
    out
}

/// Runs every cell on a pool of `jobs` threads. Failed cells are recorded and
/// the sweep goes on. Writes `sweep_summary.csv` and, if anything failed,
/// `sweep_failures.txt` to `out_dir`; each cell writes its own run files to
/// `out_dir/cells`.
pub fn run_sweep(base: &ExperimentConfig, jobs: usize, out_dir: &Path) -> Result<Vec<SummaryRow>, CliError> {
    base.validate()?;
    let cell_dir = out_dir.join("cells");
    fs::create_dir_all(&cell_dir).map_err(CliError::io(format!("creating {}", cell_dir.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    let results: Vec<CellResult> = pool.install(|| {
        cells(base)
            .into_par_iter()
            .map(|cell| {
                let outcome = run_to_dir(&cell.config, &cell_dir)
                    .map(|(summary, _)| summary.result.final_rmse)
                    .map_err(|e| e.to_string());
                CellResult { cell, outcome }
            })
            .collect()
    });

    let rows = summarize(&results);
    let path = out_dir.join("sweep_summary.csv");
    fs::write(&path, render(&rows)).map_err(CliError::io(format!("writing {}", path.display())))?;
    let failures: Vec<String> = results
        .iter()
        .filter_map(|r| r.outcome.as_ref().err().map(|e| format!("{}: {e}", r.cell.config.experiment.name)))
        .collect();
    if !failures.is_empty() {
        let path = out_dir.join("sweep_failures.txt");
        fs::write(&path, failures.join("\n") + "\n").map_err(CliError::io(format!("writing {}", path.display())))?;
    }
    Ok(rows)
}
