//! Scenario-driven front end: `parabolica <command> --scenario <file>`.

use std::path::PathBuf;

use clap::Parser;

use crate::error::{Error, Result};

pub mod expr;
mod run;
pub mod scenario;

pub use expr::{Expr, Scope, Var};
pub use run::{emit_report, run_scenario, ExitStatus, RunOutcome};
pub use scenario::{compile, parse_scenario, Scenario, ScenarioDoc, BACKENDS, COMMANDS, SUITES};

pub const THREADS_ENV: &str = "PARABOLICA_THREADS";

#[derive(Debug, Clone, Parser)]
#[command(name = "parabolica", version, about = "Evolution operators, mild solutions and estimate suites")]
pub struct Args {
    /// One of validate, evolve-linear, solve, measures, verify, oracle-compare.
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(COMMANDS))]
    pub command: String,
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory; defaults to `output.dir` of the scenario, then `out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; falls back to PARABOLICA_THREADS.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// `--threads`, else the environment variable, else the rayon default.
pub fn resolve_threads(flag: Option<usize>, env: Option<&str>) -> Result<Option<usize>> {
    let n = match (flag, env) {
        (Some(n), _) => Some(n),
        (None, Some(v)) => Some(v.trim().parse::<usize>().map_err(|_| {
            Error::InvalidInput(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))
        })?),
        (None, None) => None,
    };
    if n == Some(0) {
        return Err(Error::InvalidInput("thread count must be positive".into()));
    }
    Ok(n)
}

pub fn read_scenario(path: &std::path::Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text).map_err(|e| e.context(path.display().to_string()))
}

/// Runs the CLI and returns the process exit code.
pub fn main_with(args: Args) -> i32 {
    match execute(&args) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            outcome.status.code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitStatus::Failure.code()
        }
    }
}

fn execute(args: &Args) -> Result<RunOutcome> {
    let env = std::env::var(THREADS_ENV).ok();
    if let Some(n) = resolve_threads(args.threads, env.as_deref())? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("cannot configure {n} threads: {e}")))?;
    }
    let sc = read_scenario(&args.scenario)?;
    run_scenario(&sc, &args.command, args.out.as_deref(), args.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_resolution() {
        assert_eq!(resolve_threads(Some(3), Some("5")).unwrap(), Some(3));
        assert_eq!(resolve_threads(None, Some("5")).unwrap(), Some(5));
        assert_eq!(resolve_threads(None, None).unwrap(), None);
        assert!(resolve_threads(None, Some("lots")).is_err());
        assert!(resolve_threads(Some(0), None).is_err());
    }
}
