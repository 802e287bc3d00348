//! Command-line front end: problem files in, traces and certificate
//! reports out.
//!
//! Exit codes: `run` gives 0 on convergence, 1 on validation errors, 2 when
//! the divergence guard or the non-contraction detector fires, and 3 when
//! the step budget runs out or a step fails. `certify` gives 0 when every
//! requested certificate is valid and dominates the trace, 1 on validation
//! errors or a trace/problem hash mismatch, and 4 otherwise.

pub mod catalog;
pub mod certify;
pub mod problem;
pub mod run;
pub mod sweep;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use problem::{Overrides, Problem, ProblemFile};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("trace was recorded for problem hash {expected}, but this problem hashes to {found}")]
    HashMismatch { expected: String, found: String },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        run::EXIT_VALIDATION
    }
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Reads a problem file, or a built-in problem when no such file exists.
pub fn load_problem(spec: &str) -> Result<ProblemFile, CliError> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        return ProblemFile::from_toml(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())));
    }
    match catalog::lookup(spec) {
        Some(entry) => ProblemFile::from_toml(entry.text),
        None => Err(CliError::Validation(format!("`{spec}` is neither a readable file nor a catalog problem"))),
    }
}

#[derive(Debug, Parser)]
#[command(name = "nkv", version, about = "Inexact Newton-Kantorovich iterations with majorant certificates")]
pub struct Cli {
    /// Seed for random injection and constant estimation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Horizon over which certificate side conditions are checked.
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    /// Tolerance for the inner equations `x = B(x)`.
    #[arg(long = "inner-tol", global = true)]
    pub inner_tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterate a problem and write trace.csv, iterates.csv and run.json.
    Run {
        /// Problem file or catalog name.
        problem: String,
    },
    /// Check a recorded trace against the problem's certificate requests.
    Certify {
        problem: String,
        /// Run directory (or its trace.csv) written by `run`.
        #[arg(long)]
        trace: PathBuf,
    },
    /// Run once per value of a parameter and write summary.csv.
    Sweep {
        problem: String,
        /// One of eps, sigma, gamma, m, alpha.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// List built-in problems, or print one as a problem file.
    Catalog { name: Option<String> },
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, inner_tol: self.inner_tol, horizon: self.horizon }
    }

    fn out_dir(&self, file: &ProblemFile) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out").join(file.display_name()))
    }
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    let ov = cli.overrides();
    match &cli.command {
        Command::Run { problem } => {
            let file = load_problem(problem)?;
            let out = cli.out_dir(&file);
            let p = Problem::build(file, ov)?;
            let outcome = run::execute(&p, cli.horizon)?;
            run::write_outputs(&p, &outcome, &out)?;
            println!(
                "{}: {} -> {}",
                p.file.display_name(),
                outcome.summary["stop_message"].as_str().unwrap_or(""),
                out.display()
            );
            Ok(outcome.exit)
        }
        Command::Certify { problem, trace } => {
            let p = Problem::build(load_problem(problem)?, ov)?;
            let code = certify::certify_files(&p, trace, cli.out.as_deref(), cli.horizon)?;
            println!(
                "{}: {}",
                p.file.display_name(),
                if code == certify::EXIT_CERTIFIED { "all certificates valid" } else { "not certified" }
            );
            Ok(code)
        }
        Command::Sweep { problem, param, values } => {
            let file = load_problem(problem)?;
            let values = sweep::parse_values(values)?;
            let out = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("out").join(format!("{}-sweep-{param}", file.display_name())));
            let csv = sweep::sweep(&file, param, &values, &out, ov)?;
            print!("{csv}");
            Ok(0)
        }
        Command::Catalog { name: None } => {
            for e in catalog::CATALOG {
                println!("{:<30} {}", e.name, e.summary);
            }
            Ok(0)
        }
        Command::Catalog { name: Some(name) } => match catalog::lookup(name) {
            Some(e) => {
                print!("{}", e.text.trim_start());
                Ok(0)
            }
            None => Err(CliError::Validation(format!("no catalog problem named `{name}`"))),
        },
    }
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
