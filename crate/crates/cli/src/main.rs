use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fedkan::codec::verify_bound;
use fedkan_cli::bench::{codec_bench, render_bench, render_bound};
use fedkan_cli::runner::run_to_dir;
use fedkan_cli::sweep::{render, run_sweep};
use fedkan_cli::{CliError, ExperimentConfig, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "fedkan", version, about = "Federated KAN experiments under an uplink bit budget")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "runs")]
    out_dir: PathBuf,
    /// Start from the desk-scale defaults instead of the full protocol.
    #[arg(long)]
    desk_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its metrics and summary.
    Run {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Run the `[sweep]` cross-product and write a summary table.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Cells run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check the top-k error bound against the exhaustive optimum.
    VerifyBound {
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 8)]
        g_max: usize,
        #[arg(long, default_value_t = 3)]
        o_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Mean sparsification error per selector across retained ratios.
    CodecBench {
        #[arg(long, default_value_t = 10)]
        g: usize,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, default_value_t = 500)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(exp: &ExperimentArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &exp.config {
        Some(path) => ExperimentConfig::load(path, exp.desk_scale)?,
        None if exp.desk_scale => ExperimentConfig::desk_scale(),
        None => ExperimentConfig::full_scale(),
    };
    if let Some(seed) = exp.seed {
        cfg.experiment.seed = seed;
    }
    Ok(cfg)
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { exp } => {
            let cfg = load(&exp)?;
            let (summary, files) = run_to_dir(&cfg, &exp.out_dir)?;
            let r = &summary.result;
            println!("final rmse {}  rounds {}  sparse rounds {}  total bits {}", r.final_rmse, r.rounds, r.sparse_rounds, r.total_bits);
            println!("metrics {}", files.metrics.display());
            println!("summary {}", files.summary.display());
        }
        Command::Sweep { exp, jobs } => {
            let cfg = load(&exp)?;
            let rows = run_sweep(&cfg, jobs, &exp.out_dir)?;
            print!("{}", render(&rows));
            let failed: usize = rows.iter().map(|r| r.failed).sum();
            if failed > 0 {
                eprintln!("{failed} cell(s) failed, see {}", exp.out_dir.join("sweep_failures.txt").display());
            }
        }
        Command::VerifyBound { trials, g_max, o_max, seed } => {
            let report = verify_bound(trials, g_max, o_max, seed).map_err(|e| CliError::Config(e.to_string()))?;
            print!("{}", render_bound(&report));
            if report.violations > 0 {
                return Err(CliError::Verification(format!("{} bound violation(s)", report.violations)));
            }
        }
        Command::CodecBench { g, order, draws, seed } => {
            print!("{}", render_bench(&codec_bench(g, order, draws, seed)?));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
