use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cstdp::exec::{init_threads, Execution};
use cstdp_cli::{dispatch, load_config, Command};

#[derive(Parser)]
#[command(name = "cstdp", version, about = "Cyclic STDP spiking associative memory")]
struct Cli {
    /// Flat key = value configuration file; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config file.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads; 1 runs every job on the calling thread.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Single-pattern convergence and recruitment over repeated training.
    Exp1,
    /// Recall accuracy against the number of stored patterns.
    Exp2,
    /// Train one pattern and write its weight snapshot.
    Train,
    /// Replay a pattern against a stored snapshot and print output spike times.
    Recall {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        pattern: PathBuf,
        #[arg(long)]
        cycles: Option<usize>,
    },
    /// Search for the weight-to-conductance scalar.
    Calibrate,
    /// Information content of the configured code.
    Info,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Sub::Exp1 => Command::Exp1,
        Sub::Exp2 => Command::Exp2,
        Sub::Train => Command::Train,
        Sub::Recall {
            snapshot,
            pattern,
            cycles,
        } => Command::Recall {
            snapshot,
            pattern,
            cycles,
        },
        Sub::Calibrate => Command::Calibrate,
        Sub::Info => Command::Info,
    };
    let exec = match cli.threads {
        Some(0) => {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::FAILURE;
        }
        Some(1) => Execution::Sequential,
        Some(n) => {
            init_threads(n);
            Execution::Parallel
        }
        None => Execution::Parallel,
    };
    let result = load_config(cli.config.as_deref(), cli.seed, cli.out_dir)
        .and_then(|cfg| dispatch(&command, &cfg, exec, &mut io::stdout().lock()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
