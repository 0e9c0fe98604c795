//! `cpshift` command-line front end.
//!
//! Exit codes: 0 on success (and on a ROBUST verdict for `diagnose`), 2 when
//! `diagnose` returns VULNERABLE or CATASTROPHIC_EXPECTED, 1 on any error.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Outcome, StageError};
use config::{RunArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "cpshift", version, about = "Conformal coverage under distribution shift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Shift diagnostics and a deployment verdict.
    Diagnose(RunArgs),
    /// Seed ensemble of split-conformal trials.
    Ensemble(RunArgs),
    /// Walk-forward retraining schedules.
    Retrain(RunArgs),
    /// Placebo split versus the real shift split.
    Placebo(RunArgs),
    /// Static conformal versus adaptive conformal inference.
    Aci(RunArgs),
    /// Write a synthetic scenario as CSV plus schema.
    Generate(RunArgs),
}

fn run(name: &str, args: &RunArgs) -> Result<Outcome, StageError> {
    let cfg = RunConfig::resolve(name, args).map_err(|e| StageError::new("parse_config", e))?;
    let outcome = match name {
        "diagnose" => commands::diagnose(&cfg),
        "ensemble" => commands::ensemble(&cfg),
        "retrain" => commands::retrain(&cfg),
        "placebo" => commands::placebo(&cfg),
        "aci" => commands::aci(&cfg),
        _ => commands::generate(&cfg),
    }?;
    commands::write_outputs(&cfg.out, &outcome.files)?;
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Diagnose(a) => ("diagnose", a),
        Command::Ensemble(a) => ("ensemble", a),
        Command::Retrain(a) => ("retrain", a),
        Command::Placebo(a) => ("placebo", a),
        Command::Aci(a) => ("aci", a),
        Command::Generate(a) => ("generate", a),
    };
    match run(name, args) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            match outcome.status {
                Some(status) if !status.is_robust() => ExitCode::from(2),
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error in stage {}: {}", e.stage, e.message);
            ExitCode::from(1)
        }
    }
}
