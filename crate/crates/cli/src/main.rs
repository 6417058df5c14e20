//! `robust-priors`: penalty sweeps on decision and classification tables,
//! and the fMRI trial-estimate simulation.

mod args;
mod output;
mod run;

use std::io::IsTerminal;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub const CONFIG: u8 = 2;
    pub const DATA: u8 = 3;
    pub const NUMERICAL: u8 = 4;
    pub const OUTPUT: u8 = 1;

    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Self::CONFIG, message)
    }
}

impl From<robust_priors::Error> for CliError {
    fn from(err: robust_priors::Error) -> Self {
        use robust_priors::Error as E;
        let code = match &err {
            E::Config(_) => Self::CONFIG,
            E::Data { .. } | E::DimensionMismatch(_) | E::InvalidInput(_) | E::Io(_) | E::Json(_) => Self::DATA,
            E::NonFinite(_) | E::DegenerateDirection | E::UndefinedEntropy | E::Numerical(_) => Self::NUMERICAL,
        };
        Self::new(code, err.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn use_color() -> bool {
    std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty()) && std::io::stderr().is_terminal()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Decide(a) => run::decide(a),
        Command::Classify(a) => run::classify(a),
        Command::Fmri(a) => run::fmri(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if use_color() {
                eprintln!("\x1b[31merror:\x1b[0m {}", e.message);
            } else {
                eprintln!("error: {}", e.message);
            }
            ExitCode::from(e.code)
        }
    }
}
