//! `region-search`: run searches, benchmarks, corpus generation and trace
//! export from the command line.
//!
//! Configuration resolves as defaults, then `--config FILE`, then the
//! EMBEDDER_URL / GROUNDER_URL environment variables, then flags.
//!
//! Exit codes: 0 success, 1 input error, 2 configuration error,
//! 3 provider or engine error.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// A failure mapped to its exit code.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Config(String),
    Engine(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Config(_) => 2,
            CliError::Engine(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Config(m) | CliError::Engine(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
