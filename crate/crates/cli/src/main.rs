//! `riskstop`: solves and verifies risk-sensitive stopping models described in JSON files.
//!
//! Exit status: 0 on success, 1 when a checked property fails (the report is still written),
//! 2 on bad input.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("RISKSTOP_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("RISKSTOP_THREADS must be a non-negative integer, got `{raw}`"))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn output_path(command: &Command) -> Option<&std::path::Path> {
    let common = match command {
        Command::Solve { common, .. }
        | Command::LagSolve { common, .. }
        | Command::FilterSolve { common, .. }
        | Command::VerifyMarkov { common, .. }
        | Command::VerifyTimeConsistency { common, .. }
        | Command::VerifyAcceptance { common, .. }
        | Command::DualCheck { common, .. }
        | Command::Oracle { common, .. } => common,
    };
    common.output.as_deref()
}

fn tolerance(command: &Command) -> f64 {
    match command {
        Command::Solve { common, .. }
        | Command::LagSolve { common, .. }
        | Command::FilterSolve { common, .. }
        | Command::VerifyMarkov { common, .. }
        | Command::VerifyTimeConsistency { common, .. }
        | Command::VerifyAcceptance { common, .. }
        | Command::DualCheck { common, .. }
        | Command::Oracle { common, .. } => common.tolerance,
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
    let tol = tolerance(&cli.command);
    if !(tol.is_finite() && tol > 0.0) {
        eprintln!("riskstop: --tolerance must be positive, got {tol}");
        return ExitCode::from(2);
    }
    if let Err(e) = configure_threads() {
        eprintln!("riskstop: {e}");
        return ExitCode::from(2);
    }
    let run = match commands::run(&cli.command) {
        Ok(run) => run,
        Err(e) => {
            eprintln!("riskstop: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = output::emit(output_path(&cli.command), &run.text) {
        eprintln!("riskstop: cannot write report: {e}");
        return ExitCode::from(2);
    }
    if run.pass {
        ExitCode::SUCCESS
    } else {
        eprintln!("riskstop: property check failed");
        ExitCode::from(1)
    }
}
