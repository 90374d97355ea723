//! `ebshrink`: simulate compound data, fit marginal density models, apply
//! shrinkage rules, run realizability diagnostics, and benchmark rules
//! against the oracle.
//!
//! Exit codes: 0 success, 2 invalid input/config, 4 strict-mode
//! diagnostic failure, 5 strict-mode non-convergence.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod errors;
mod svg;
mod util;

use errors::CliError;

#[derive(Parser)]
#[command(name = "ebshrink", version, about = "Empirical Bayes shrinkage toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw latent means from a prior and observations from the family
    /// likelihood; writes a CSV plus a JSON sidecar.
    Simulate(commands::simulate::SimulateArgs),
    /// Fit a marginal density model to an observations CSV.
    Fit(commands::fit::FitArgs),
    /// Apply a shrinkage rule; writes a y,delta CSV plus a JSON summary.
    Estimate(commands::estimate::EstimateArgs),
    /// Run realizability diagnostics on a fitted model.
    Diagnose(commands::diagnose::DiagnoseArgs),
    /// Factorial sweep of priors x rules x sample sizes against the
    /// oracle rule.
    Bench(commands::bench::BenchArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Fit(args) => commands::fit::run(args),
        Command::Estimate(args) => commands::estimate::run(args),
        Command::Diagnose(args) => commands::diagnose::run(args),
        Command::Bench(args) => commands::bench::run(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
