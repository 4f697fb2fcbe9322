//! `gaitbench`: train, evaluate, analyze and report on obstacle locomotion.
//!
//! Exit codes: 0 success, 1 internal fault, 2 usage or configuration error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gaitbench::checkpoint::Phase;

#[derive(Debug, Parser)]
#[command(name = "gaitbench", version, about = "Locomotion training and evaluation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Workers {
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "GAITBENCH_WORKERS", global = true)]
    workers: Option<usize>,
}

impl Workers {
    fn resolve(&self) -> usize {
        self.workers
            .filter(|&n| n > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a blind policy or a visual residual.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "blind")]
        phase: Phase,
        /// Training regimen (visual phase only).
        #[arg(long)]
        regimen: Option<String>,
        /// Checkpoint to continue from; required for the visual phase.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Override the iteration budget from the config.
        #[arg(long)]
        iterations: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        workers: Workers,
    },
    /// Run obstacle sweeps with a checkpoint.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Obstacle kind or `all`.
        #[arg(long, default_value = "all")]
        obstacle: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = gaitbench::protocol::DEFAULT_LEVELS)]
        levels: usize,
        #[arg(long, default_value_t = gaitbench::protocol::DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        workers: Workers,
    },
    /// Compute behavior metrics from sweeps into a report CSV.
    Analyze {
        /// Sweep directories, or directories holding sweep directories.
        sweeps: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        workers: Workers,
    },
    /// Merge report CSVs from several checkpoints.
    Report {
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export a terrain for plotting.
    Terrain {
        /// Obstacle or standard terrain kind.
        #[arg(long)]
        kind: String,
        /// Obstacle difficulty in [0, 1].
        #[arg(long, default_value_t = 0.5)]
        difficulty: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Train {
            config,
            phase,
            regimen,
            resume,
            iterations,
            out,
            workers,
        } => commands::train(&commands::TrainArgs {
            config,
            phase,
            regimen,
            resume,
            iterations,
            out,
            workers: workers.resolve(),
        }),
        Command::Evaluate {
            checkpoint,
            obstacle,
            seed,
            levels,
            trials,
            out,
            workers,
        } => commands::evaluate(&commands::EvaluateArgs {
            checkpoint,
            obstacle,
            seed,
            levels,
            trials,
            out,
            workers: workers.resolve(),
        }),
        Command::Analyze { sweeps, out, workers } => commands::analyze(&sweeps, &out, workers.resolve()),
        Command::Report { reports, out } => commands::report(&reports, &out),
        Command::Terrain {
            kind,
            difficulty,
            seed,
            out,
        } => commands::terrain(&kind, difficulty, seed, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gaitbench: {e}");
            ExitCode::from(e.code())
        }
    }
}
