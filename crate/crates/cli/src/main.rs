//! `cosparse`: measurement bounds, width estimates, single recoveries and
//! recovery experiments from the command line.
//!
//! Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 I/O error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Params;

#[derive(Debug, Parser)]
#[command(
    name = "cosparse",
    version,
    about = "Analysis l1 recovery of cosparse signals: bounds, width estimates and experiments",
    after_help = "Parameters can also be given in a `key = value` file via --config \
                  (one pair per line, `#` comments, keys named like the flags). \
                  Flags override the file, which overrides built-in defaults."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file of `key = value` lines
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    params: Params,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Print the measurement bound for an operator and sparsity
    Bound,
    /// Recover one signal with TV minimization or the minimum-norm baseline
    Recover,
    /// Run a phase-transition grid over sparsity and measurement count
    Phase,
    /// Compare TV minimization with the minimum-norm baseline over trials
    Compare,
    /// Monte-Carlo upper estimate of the squared Gaussian width
    Width,
    /// Bound-comparison curves for tight unit-norm frames
    Figure1,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<cosparse::Error> for CliError {
    fn from(e: cosparse::Error) -> Self {
        use cosparse::Error as E;
        match e {
            E::InvalidArgument(_) => CliError::Usage(e.to_string()),
            E::Io { .. } | E::Parse { .. } => CliError::Io(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut params = cli.params;
    if let Some(path) = &cli.config {
        params.merge_config_file(path)?;
    }
    match cli.command {
        Command::Bound => commands::bound(&params),
        Command::Recover => commands::recover(&params),
        Command::Phase => commands::phase(&params),
        Command::Compare => commands::compare(&params),
        Command::Width => commands::width(&params),
        Command::Figure1 => commands::figure1(&params),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cosparse: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
