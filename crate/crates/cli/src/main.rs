//! `waka`: attribution scores, membership-inference audits and
//! data-minimization studies for k-NN classifiers.
//!
//! Exit codes: 0 on success, 1 on invalid input or usage, 2 on runtime
//! failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "waka", version, about = "Wasserstein k-NN attribution and privacy auditing")]
struct Cli {
    /// Flat JSON object of settings; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score every training point with an attribution method.
    Attribute(commands::AttributeFlags),
    /// Retrain after removing or adding points in attribution order.
    Minimize(commands::MinimizeFlags),
    /// Play membership-inference security games and summarise the ROC.
    Attack(commands::AttackFlags),
    /// Remove the most exposed points and re-audit the survivors.
    AuditOnion(commands::OnionFlags),
    /// Correlate per-point attack success with self-attribution.
    CorrelatePrivacy(commands::CorrelateFlags),
    /// Compare the counting algorithms with exhaustive enumeration.
    OracleCheck(commands::OracleFlags),
    /// Write a seeded synthetic dataset.
    Synth(commands::SynthFlags),
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, configuration or arguments.
    Usage(String),
    Core(waka::Error),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_validation() => 1,
            CliError::Core(_) | CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<waka::Error> for CliError {
    fn from(e: waka::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Usage("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    }
    let file = cli.config.as_deref();
    match &cli.command {
        Command::Attribute(f) => commands::attribute(f, file),
        Command::Minimize(f) => commands::minimize(f, file),
        Command::Attack(f) => commands::attack(f, file),
        Command::AuditOnion(f) => commands::audit_onion(f, file),
        Command::CorrelatePrivacy(f) => commands::correlate_privacy(f, file),
        Command::OracleCheck(f) => commands::oracle_check(f, file),
        Command::Synth(f) => commands::synth(f, file),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
