//! Command-line front end: matrix ingestion, result documents and plot data.

pub mod cli;
pub mod commands;
pub mod config;
pub mod document;
pub mod error;
pub mod input;
pub mod output;

use cli::{Cli, Command, OutputArgs};
use document::ResultDocument;
use error::CliError;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "PC_COUNT_THREADS";

/// Sizes the global thread pool from [`THREADS_ENV`], if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t >= 1)
        .ok_or_else(|| CliError::config(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::config(format!("cannot size thread pool: {e}")))
}

fn emit(doc: &ResultDocument, output: &OutputArgs) -> Result<(), CliError> {
    let json = doc.to_json();
    if let Some(dir) = &output.plot_data {
        for path in output::write_plot_data(dir, doc)? {
            log::info!("wrote {}", path.display());
        }
    }
    match &output.out {
        Some(path) => output::write_atomic(path, &json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

/// Runs one parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Estimate(args) => emit(&commands::cmd_estimate(args)?, &args.output),
        Command::AlphaSweep(args) => emit(&commands::cmd_alpha_sweep(args)?, &args.output),
        Command::Simulate(args) => emit(&commands::cmd_simulate(args)?, &args.output),
        Command::Version => {
            println!("pcskew {}", env!("CARGO_PKG_VERSION"));
            println!("schema_version {}", document::SCHEMA_VERSION);
            Ok(())
        }
    }
}
