//! `dctrw`: simulate, estimate, evaluate and compare VAF curves of the
//! directed CTRW with one-step jump memory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod manifest;
mod spec;
mod table;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::analyze::{AnalyzeArgs, AnalyzeRun};
use commands::compare::{CompareArgs, CompareRun};
use commands::curves::{CurvesArgs, CurvesRun};
use commands::simulate::{SimulateArgs, SimulateRun};
use commands::{commit, execute, Run};
use error::{CliError, Result};
use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(
    name = "dctrw",
    version,
    about = "Directed CTRW with one-step jump memory",
    args_conflicts_with_subcommands = true
)]
struct Cli {
    /// Worker threads [default: all cores]
    #[arg(long, global = true, env = "DCTRW_THREADS")]
    threads: Option<usize>,
    /// Repeat the run recorded in a manifest
    #[arg(long, value_name = "MANIFEST")]
    from_manifest: Option<PathBuf>,
    /// With --from-manifest: check the outputs against the recorded digests
    /// instead of writing them
    #[arg(long, requires = "from_manifest")]
    verify: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a walk and write it as tick CSV
    Simulate(SimulateArgs),
    /// Fit the model to tick CSV and estimate the empirical VAF
    Analyze(AnalyzeArgs),
    /// Evaluate the closed-form VAF on a lag grid
    Curves(CurvesArgs),
    /// Compare an empirical VAF with a theory curve
    Compare(CompareArgs),
}

fn run_and_write<R: Run>(run: R) -> Result<String> {
    let (exec, manifest) = execute(&run)?;
    commit(&run, &exec, &manifest)?;
    Ok(format!("{}; manifest {}", exec.summary, run.manifest_path().display()))
}

fn replay<R: Run>(m: &RunManifest, path: &Path, verify: bool) -> Result<String> {
    let run: R = serde_json::from_value(m.config.clone()).map_err(|e| CliError::Schema {
        path: path.to_path_buf(),
        message: format!("config does not describe a {} run: {e}", R::NAME),
    })?;
    let (exec, again) = execute(&run)?;
    if !verify {
        commit(&run, &exec, &again)?;
        return Ok(format!("replayed: {}", exec.summary));
    }
    let mismatched: Vec<String> =
        m.outputs.iter().filter(|o| !again.outputs.contains(o)).map(|o| o.path.display().to_string()).collect();
    if !mismatched.is_empty() || again.outputs.len() != m.outputs.len() {
        return Err(CliError::Numeric(format!("replay differs from the manifest: {}", mismatched.join(", "))));
    }
    Ok(format!("verified {} output(s) byte for byte", m.outputs.len()))
}

fn from_manifest(path: &Path, verify: bool) -> Result<String> {
    let m = RunManifest::read(path)?;
    if m.version != table::VERSION {
        eprintln!("warning: manifest written by version {}, running {}", m.version, table::VERSION);
    }
    m.check_inputs()?;
    match m.subcommand.as_str() {
        SimulateRun::NAME => replay::<SimulateRun>(&m, path, verify),
        AnalyzeRun::NAME => replay::<AnalyzeRun>(&m, path, verify),
        CurvesRun::NAME => replay::<CurvesRun>(&m, path, verify),
        CompareRun::NAME => replay::<CompareRun>(&m, path, verify),
        other => Err(CliError::Schema { path: path.to_path_buf(), message: format!("unknown subcommand {other:?}") }),
    }
}

fn dispatch(cli: Cli) -> Result<String> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("thread count must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    if let Some(path) = &cli.from_manifest {
        return from_manifest(path, cli.verify);
    }
    match cli.command {
        Some(Command::Simulate(a)) => run_and_write(a.resolve()?),
        Some(Command::Analyze(a)) => run_and_write(a.resolve()?),
        Some(Command::Curves(a)) => run_and_write(a.resolve()?),
        Some(Command::Compare(a)) => run_and_write(a.resolve()?),
        None => Err(CliError::Validation("no subcommand given; see --help".into())),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match dispatch(cli) {
        Ok(summary) => {
            eprintln!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
