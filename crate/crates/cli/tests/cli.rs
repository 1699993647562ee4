use std::fs;
use std::path::Path;
use std::process::Command;

use fedkan_cli::bench::codec_bench;
use fedkan_cli::config::BudgetRule;
use fedkan_cli::runner::{run_to_dir, METRICS_HEADER};
use fedkan_cli::sweep::{run_sweep, summarize, Cell, CellResult};
use fedkan_cli::{CliError, ExperimentConfig, Mode, OUT_DIR_ENV};

fn fedkan() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fedkan"))
}

/// Desk-scale defaults shrunk to a few seconds of work.
fn tiny(mode: Mode) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::desk_scale();
    cfg.experiment.benchmark = "legendre".into();
    cfg.experiment.mode = mode;
    cfg.data.train_samples = 240;
    cfg.data.test_samples = 60;
    cfg.fl.clients = 4;
    cfg.fl.rounds = 6;
    cfg.fl.local_epochs = 1;
    cfg.grid.period = 2;
    cfg.grid.fixed = 3;
    cfg
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(METRICS_HEADER));
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn fixed_grid_run_writes_constant_grid_column() {
    let dir = tempfile::tempdir().unwrap();
    let (summary, files) = run_to_dir(&tiny(Mode::FixedGrid), dir.path()).unwrap();
    let rows = rows(&files.metrics);
    assert_eq!(rows.len(), 6);
    for (t, row) in rows.iter().enumerate() {
        assert_eq!(row[0], t.to_string());
        assert_eq!(row[1], "3");
        assert_eq!(row[3], "");
        assert_eq!(row[4], "1");
    }
    assert_eq!(summary.result.rounds, 6);
    assert_eq!(summary.result.final_rmse.to_string(), rows[5][5]);
}

#[test]
fn compressed_rows_stay_within_budget() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(Mode::CompressedGrid);
    cfg.grid.period = 1;
    cfg.grid.deltas = vec![2, 7, 27];
    let (summary, files) = run_to_dir(&cfg, dir.path()).unwrap();
    let budget = summary.result.budget_bits.unwrap();
    let mut sparse = 0;
    let grids: Vec<String> = rows(&files.metrics).iter().map(|r| r[1].clone()).collect();
    assert_eq!(grids, ["3", "5", "12", "39", "39", "39"]);
    for row in rows(&files.metrics) {
        let rho: f64 = row[4].parse().unwrap();
        assert_eq!(row[3], budget.to_string());
        if rho < 1.0 {
            sparse += 1;
            assert!(row[2].parse::<u64>().unwrap() <= budget);
        }
    }
    assert_eq!(sparse, 4);
    assert_eq!(summary.result.sparse_rounds, 4);
}

#[test]
fn summary_echo_reproduces_the_run() {
    let first = tempfile::tempdir().unwrap();
    let mut cfg = tiny(Mode::CompressedGrid);
    cfg.experiment.seed = 17;
    let (_, files) = run_to_dir(&cfg, first.path()).unwrap();

    let second = tempfile::tempdir().unwrap();
    let status = fedkan()
        .arg("run")
        .arg("--config")
        .arg(&files.summary)
        .arg("--out-dir")
        .arg(second.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let replay = second.path().join(files.metrics.file_name().unwrap());
    assert_eq!(fs::read(&files.metrics).unwrap(), fs::read(replay).unwrap());
}

#[test]
fn seed_flag_and_out_dir_env() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(&config, tiny(Mode::FixedGrid).to_toml()).unwrap();
    let status = fedkan()
        .args(["run", "--seed", "5", "--config"])
        .arg(&config)
        .env(OUT_DIR_ENV, dir.path().join("env-out"))
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let summary = dir.path().join("env-out/legendre_fixed-grid-3_s5.summary.toml");
    let echoed = ExperimentConfig::load(&summary, false).unwrap();
    assert_eq!(echoed.experiment.seed, 5);
}

#[test]
fn config_errors_name_the_field_and_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for (text, field) in [
        ("[fl]\nparticipation = 1.5\n", "fl.participation"),
        ("[fl]\nrouns = 3\n", "fl.rouns"),
        ("[data]\nalpha = \"high\"\n", "data.alpha"),
        ("[experiment]\nbenchmark = \"feynman-II.1\"\n", "experiment.benchmark"),
        ("[experiment]\nmode = \"cg\"\n", "cg"),
        ("[budget]\nrule = \"match-grid\"\nmatch_grid = 0\n", "budget.match_grid"),
    ] {
        let path = dir.path().join("bad.toml");
        fs::write(&path, text).unwrap();
        let out = fedkan().args(["run", "--desk-scale", "--config"]).arg(&path).arg("--out-dir").arg(dir.path()).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{text}");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(stderr.contains(field), "{text}: {stderr}");
    }
}

#[test]
fn explicit_bit_budget() {
    let text = "[budget]\nrule = \"bits\"\nbits = 4000\n[experiment]\nmode = \"sparsify-random\"\n";
    let cfg = ExperimentConfig::from_toml(text, true).unwrap();
    assert_eq!(cfg.budget.rule, BudgetRule::Bits);
    assert_eq!(cfg.fl_config().unwrap().budget, Some(4000));
    assert_eq!(ExperimentConfig::from_toml("[experiment]\nmode = \"grid-extended\"\n", true).unwrap().budget_bits().unwrap(), None);
}

#[test]
fn full_scale_schedule_matches_published_trace() {
    let cfg = ExperimentConfig::full_scale();
    let s = cfg.schedule();
    let grids: Vec<usize> = [0, 199, 200, 400, 600, 800, 999].iter().map(|&t| s.grid_size_at(t)).collect();
    assert_eq!(grids, [3, 3, 5, 12, 39, 86, 86]);
}

#[test]
fn verify_bound_command_reports_and_passes() {
    let out = fedkan().args(["verify-bound", "--trials", "400", "--seed", "2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("violations 0"));
    assert!(stdout.contains("vs bound 24"));
    assert_eq!(CliError::Verification("x".into()).exit_code(), 3);
    let too_big = fedkan().args(["verify-bound", "--g-max", "40"]).output().unwrap();
    assert_eq!(too_big.status.code(), Some(2));
}

#[test]
fn codec_bench_edge_rows() {
    let rows = codec_bench(10, 3, 50, 1).unwrap();
    assert_eq!(rows.len(), 12);
    let none = &rows[0];
    assert_eq!(none.k, 0);
    assert!(none.topk > 0.0);
    assert_eq!([none.random, none.fixed, none.optimal], [none.topk; 3]);
    let full = rows.last().unwrap();
    assert_eq!((full.ratio, full.k), (None, 13));
    assert_eq!([full.topk, full.random, full.fixed, full.optimal], [0.0; 4]);
    let out = fedkan().args(["codec-bench", "--draws", "20"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("ratio,k,topk,random,fixed,optimal\n0.0,0,"));
    assert!(stdout.lines().last().unwrap().starts_with("full,13,0,0,0,0"));
}

#[test]
fn single_cell_sweep_equals_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(Mode::GridExtended);
    cfg.sweep.benchmarks = vec!["legendre".into()];
    cfg.sweep.alphas = vec![cfg.data.alpha];
    cfg.sweep.modes = vec![Mode::GridExtended];
    cfg.sweep.replicates = 1;
    let rows = run_sweep(&cfg, 2, dir.path()).unwrap();
    assert_eq!(rows.len(), 1);
    let (summary, _) = run_to_dir(&cfg, &dir.path().join("direct")).unwrap();
    assert_eq!(rows[0].median_rmse, Some(summary.result.final_rmse));
    assert!(dir.path().join("sweep_summary.csv").exists());
}

#[test]
fn sweep_shape_and_best_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(Mode::GridExtended);
    cfg.fl.rounds = 3;
    cfg.sweep.benchmarks = vec!["legendre".into(), "bessel".into()];
    cfg.sweep.alphas = vec![0.5, 5.0];
    cfg.sweep.modes = vec![Mode::FixedGrid, Mode::CompressedGrid];
    cfg.sweep.fixed_grids = vec![3, 5];
    cfg.sweep.replicates = 2;
    let rows = run_sweep(&cfg, 3, dir.path()).unwrap();
    // Per (function, alpha): two fixed grids, compressed-grid, best-fixed.
    assert_eq!(rows.len(), 2 * 2 * 4);
    for chunk in rows.chunks(4) {
        let labels: Vec<&str> = chunk.iter().map(|r| r.mode.as_str()).collect();
        assert_eq!(labels, ["fixed-grid-3", "fixed-grid-5", "compressed-grid", "best-fixed"]);
        let best = chunk[..2].iter().map(|r| r.median_rmse.unwrap()).fold(f64::INFINITY, f64::min);
        assert_eq!(chunk[3].median_rmse, Some(best));
        assert!(chunk.iter().all(|r| r.completed == 2 && r.failed == 0));
    }
    let csv = fs::read_to_string(dir.path().join("sweep_summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + rows.len());
    assert_eq!(fs::read_dir(dir.path().join("cells")).unwrap().count(), 2 * 2 * 3 * 2 * 2);
}

#[test]
fn failed_cells_are_marked_not_fatal() {
    let cfg = tiny(Mode::FixedGrid);
    let cell = |mode, fixed_grid, outcome| CellResult {
        cell: Cell { benchmark: "bessel".into(), alpha: 1.0, mode, fixed_grid, replicate: 0, config: cfg.clone() },
        outcome,
    };
    let rows = summarize(&[
        cell(Mode::FixedGrid, Some(3), Ok(0.5)),
        cell(Mode::FixedGrid, Some(5), Ok(0.2)),
        cell(Mode::FixedGrid, Some(5), Err("partition failed".into())),
        cell(Mode::FixedGrid, Some(10), Err("diverged".into())),
        cell(Mode::GridExtended, None, Ok(0.1)),
    ]);
    let labels: Vec<&str> = rows.iter().map(|r| r.mode.as_str()).collect();
    assert_eq!(labels, ["fixed-grid-3", "fixed-grid-5", "fixed-grid-10", "grid-extended", "best-fixed"]);
    assert_eq!((rows[1].completed, rows[1].failed), (1, 1));
    assert_eq!((rows[2].median_rmse, rows[2].failed), (None, 1));
    assert_eq!((rows[4].grid, rows[4].median_rmse), (Some(5), Some(0.2)));
}
