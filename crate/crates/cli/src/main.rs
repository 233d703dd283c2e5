//! `decoherence`: runs scenario files against the reduced-dynamics models.
//!
//! Exit status: 0 on success, 2 for an invalid scenario, 3 for a model
//! whose Hamiltonian is unbounded below, 4 for numerical failures and
//! failed invariant checks. Failures print a JSON report on stderr.

// `!(x > y)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod output;
mod report;
mod run;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::report::{CliError, CliResult, ErrorKind};

#[derive(Debug, Parser)]
#[command(name = "decoherence", version, about = "Decoherence curves for a particle coupled to a Boson field")]
struct Cli {
    /// Worker threads for time grids and sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute curves, tables and reports and write them to the output directory.
    Run {
        scenario: PathBuf,

        /// Output directory; overrides the scenario and DECOHERENCE_OUTPUT_DIR.
        #[arg(long)]
        output_dir: Option<PathBuf>,

        /// Enable the mode oracle with this many modes.
        #[arg(long)]
        oracle_modes: Option<usize>,

        /// Treat warnings as failed checks.
        #[arg(long)]
        strict: bool,
    },
    /// Validate a scenario and classify its coupling without time evolution.
    Check {
        scenario: PathBuf,

        /// Treat warnings as errors.
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Debug, Serialize)]
struct CheckReport {
    valid: bool,
    #[serde(flatten)]
    classification: run::Classification,
    samples: usize,
    warnings: Vec<String>,
}

fn check(path: &Path, strict: bool) -> CliResult<()> {
    let plan = scenario::load(path)?;
    let mut warnings = Vec::new();
    let classification = run::classify(&plan, &mut warnings)?;
    let report = CheckReport { valid: true, classification, samples: plan.times.len(), warnings };
    println!("{}", serde_json::to_string_pretty(&report).map_err(|e| CliError::new(ErrorKind::Io, e.to_string()))?);
    if strict && !report.warnings.is_empty() {
        return Err(CliError::new(
            ErrorKind::ConfigInvalid,
            format!("{} warning(s) in strict mode", report.warnings.len()),
        ));
    }
    Ok(())
}

fn run(path: &Path, output_dir: Option<PathBuf>, oracle_modes: Option<usize>, strict: bool) -> CliResult<()> {
    let mut plan = scenario::load(path)?;
    if let Some(modes) = oracle_modes {
        if modes < 2 {
            return Err(CliError::config("--oracle-modes", "need at least 2 modes"));
        }
        let mut oracle = plan.oracle.unwrap_or(scenario::OraclePlan {
            modes,
            scheme: decoherence_core::GridScheme::Midpoint,
            tolerance: scenario::DEFAULT_ORACLE_TOLERANCE,
            t_max: scenario::DEFAULT_ORACLE_T_MAX,
        });
        oracle.modes = modes;
        plan.oracle = Some(oracle);
    }
    let dir = output::resolve_dir(output_dir.as_deref(), plan.output_dir.as_deref());
    let outcome = run::execute(&plan, strict)?;
    output::write_all(&dir, &outcome.artifacts)?;
    println!("{}", dir.join(run::SUMMARY_FILE).display());
    let failed: Vec<&str> = outcome.summary.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if !failed.is_empty() {
        return Err(CliError::new(ErrorKind::CheckFailed, format!("failed checks: {}", failed.join(", "))));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("{}", CliError::config("--threads", e.to_string()).report());
            return ExitCode::from(ErrorKind::ConfigInvalid.exit_code());
        }
    }
    let result = match &cli.command {
        Command::Run { scenario, output_dir, oracle_modes, strict } => {
            run(scenario, output_dir.clone(), *oracle_modes, *strict)
        }
        Command::Check { scenario, strict } => check(scenario, *strict),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.kind.exit_code())
        }
    }
}
