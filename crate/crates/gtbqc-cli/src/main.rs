//! Command-line driver: batch protocol runs, gate-set condition checks and
//! blindness audits.
//!
//! Exit codes: 0 success, 1 a checked criterion failed, 2 configuration or
//! parse error, 3 protocol abort, 4 file I/O error, 5 insufficient shots for
//! the requested audit thresholds.

mod audit_cmd;
mod check_cmd;
mod run_cmd;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "gtbqc", version, about = "Gate-teleportation blind-computation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a delegated program and write the transcript and summary.
    Run(run_cmd::RunArgs),
    /// Run the commutation / substitution decision procedures on a gate set.
    Check(check_cmd::CheckArgs),
    /// Run the blindness audits described by a config file.
    Audit(audit_cmd::AuditArgs),
}

/// Failure modes mapped to stable exit codes.
pub enum CliError {
    CriterionFailed(String),
    Config(String),
    ProtocolAbort(String),
    Io(String),
    InsufficientShots(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::CriterionFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::ProtocolAbort(_) => 3,
            CliError::Io(_) => 4,
            CliError::InsufficientShots(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::CriterionFailed(m)
            | CliError::Config(m)
            | CliError::ProtocolAbort(m)
            | CliError::Io(m)
            | CliError::InsufficientShots(m) => m,
        }
    }
}

impl From<gtbqc::Error> for CliError {
    fn from(e: gtbqc::Error) -> Self {
        match e {
            gtbqc::Error::ProtocolAbort { .. } => CliError::ProtocolAbort(e.to_string()),
            gtbqc::Error::InsufficientSamples { .. } => CliError::InsufficientShots(e.to_string()),
            gtbqc::Error::Io(_) => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

pub fn read_file(path: &std::path::Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))
}

pub fn write_file(path: &std::path::Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Io(format!("creating {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run_cmd::execute(args),
        Command::Check(args) => check_cmd::execute(args),
        Command::Audit(args) => audit_cmd::execute(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
