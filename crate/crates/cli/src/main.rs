use std::path::PathBuf;
use std::process::ExitCode;

use clap::{error::ErrorKind, Args, Parser, Subcommand};

mod commands;
mod config;
mod report;

/// Latent-space Bayesian optimization of training schedules.
#[derive(Debug, Parser)]
#[command(name = "zbo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct StageArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Workspace directory for this stage's outputs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Global seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate training trajectories.
    Gen(StageArgs),
    /// Train the trajectory autoencoder on the generated set.
    TrainTvae(StageArgs),
    /// Run latent Bayesian optimization into `<out>/run`.
    RunZbo {
        #[arg(long, required_unless_present = "resume", conflicts_with = "resume")]
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "resume")]
        out: Option<PathBuf>,
        #[arg(long, conflicts_with = "resume")]
        seed: Option<u64>,
        /// Continue an interrupted run directory.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after this many optimization steps (resumable later).
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Render maps and export the optimum from a run directory.
    Report {
        run_dir: PathBuf,
        /// Where to write the report (default `<run_dir>/report`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => commands::gen(&a.config, a.out.as_deref(), a.seed),
        Command::TrainTvae(a) => commands::train_tvae(&a.config, a.out.as_deref(), a.seed),
        Command::RunZbo {
            config,
            out,
            seed,
            resume,
            stop_after,
        } => match resume {
            Some(dir) => commands::resume_zbo(&dir, stop_after),
            None => commands::run_zbo(config.as_deref().expect("clap enforces --config"), out.as_deref(), seed, stop_after),
        },
        Command::Report { run_dir, out } => report::report(&run_dir, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
