//! Experiment driver for the fixed-point laboratory: one subcommand per
//! experiment kind, JSON configs, CSV/JSON artifacts, and a report command
//! that consolidates finished runs.
//!
//! The library surface exists so integration tests can call experiments
//! in-process and read their typed summaries; the binary in `main.rs` is a
//! thin argument-parsing shell over [`run_experiment`] and
//! [`report::run_report`].

use std::fmt;
use std::path::Path;

pub mod artifacts;
pub mod bench;
pub mod codec;
pub mod config;
pub mod harness;
pub mod lpdata;
pub mod lpeval;
pub mod lptrain;
pub mod manifold;
pub mod reciprocal;
pub mod regular;
pub mod report;

use config::{load_config, Kind};

/// Run failures, split by exit code: validation problems (bad config,
/// unusable parameters, unwritable paths) exit 1; numerical failures
/// (divergence, non-finite values) exit 2.
#[derive(Debug)]
pub enum RunError {
    Validation(String),
    Numerical(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 1,
            RunError::Numerical(_) => 2,
        }
    }

    pub fn kind_label(&self) -> &'static str {
        match self {
            RunError::Validation(_) => "validation",
            RunError::Numerical(_) => "numerical",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            RunError::Validation(m) | RunError::Numerical(m) => m,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind_label(), self.message())
    }
}

impl std::error::Error for RunError {}

/// Loads the config for `kind` and runs the experiment, returning the
/// resolved output directory. `threads > 1` is a validation error unless
/// the kind is an evaluation experiment.
pub fn run_experiment(
    kind: Kind,
    config_path: &Path,
    cli_out: Option<&Path>,
    seed_override: Option<u64>,
    threads: usize,
    verbose: bool,
) -> Result<std::path::PathBuf, RunError> {
    let cfg = load_config(config_path, kind, cli_out, seed_override)?;
    if threads > 1 && !kind.threaded_eval() {
        return Err(RunError::Validation(
            "--threads > 1 is only permitted for evaluation experiments".into(),
        ));
    }
    artifacts::ensure_dir(&cfg.out)?;
    match kind {
        Kind::RegularOp => regular::run(&cfg, verbose),
        Kind::ReciprocalDemo => reciprocal::run(&cfg, verbose),
        Kind::Manifold => manifold::run(&cfg, verbose),
        Kind::LpGenerate => lpdata::run(&cfg, verbose),
        Kind::LpTrain => lptrain::run(&cfg, verbose),
        Kind::LpEval => lpeval::run(&cfg, threads, verbose),
        Kind::LipschitzCurve => harness::run(&cfg, threads, verbose),
        Kind::SolverBench => bench::run(&cfg, verbose),
    }?;
    Ok(cfg.out)
}
