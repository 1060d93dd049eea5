//! `mmpca` command-line front end: simulate corpora, fit and select models,
//! evaluate partitions, and run the noise, size, and timing benches.

mod args;
mod bench;
mod commands;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use mmpca::Execution;

use crate::args::{BenchCommand, EvalArgs, FitArgs, SelectArgs, SimulateArgs};

#[derive(Debug, Parser)]
#[command(
    name = "mmpca",
    version,
    about = "Clustering of count data with mixtures of multinomial PCA"
)]
struct Cli {
    /// Worker threads; 1 selects the sequential, bitwise-reproducible path.
    /// Defaults to all cores.
    #[arg(long, global = true, env = "MMPCA_THREADS", value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,

    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a labeled synthetic corpus.
    Simulate(SimulateArgs),
    /// Fit Q clusters and K topics.
    Fit(FitArgs),
    /// Fit a (Q, K) grid and pick the cell with the highest ICL.
    Select(SelectArgs),
    /// Adjusted Rand Index and confusion matrix of two labelings.
    Eval(EvalArgs),
    /// Replicated experiments written as plot-ready CSV.
    #[command(subcommand)]
    Bench(BenchCommand),
}

fn execution(threads: Option<u32>) -> anyhow::Result<Execution> {
    match threads {
        Some(1) => Ok(Execution::Sequential),
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n as usize)
                .build_global()?;
            Ok(Execution::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(Execution::Sequential),
        None if cfg!(feature = "parallel") => Ok(Execution::Parallel),
        None => Ok(Execution::Sequential),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let exec = execution(cli.threads)?;
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a, exec),
        Command::Fit(a) => commands::fit(&a, exec),
        Command::Select(a) => commands::select(&a, exec),
        Command::Eval(a) => commands::eval(&a),
        Command::Bench(b) => bench::run(&b, exec),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
