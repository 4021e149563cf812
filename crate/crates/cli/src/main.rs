use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fixpoint_lab::config::Kind;
use fixpoint_lab::{report, run_experiment, RunError};

#[derive(Debug, Parser)]
#[command(name = "fixpoint-lab", version, about = "Fixed-point experiment driver")]
struct Cli {
    /// Print progress notes on stderr.
    #[arg(long, global = true)]
    verbose: bool,
    /// Worker threads; accepted above 1 only for evaluation experiments.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Output directory; overrides the config file's "out".
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Path to the experiment's JSON config.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a constructive operator and measure its iterates.
    RegularOp(ConfigArg),
    /// Reciprocal refinement against its closed-form error.
    ReciprocalDemo(ConfigArg),
    /// Sphere-constrained inverse problem: growth and contraction checks.
    Manifold(ConfigArg),
    /// Generate a solved LP dataset with perturbed copies.
    LpGenerate(ConfigArg),
    /// Train a GNN solver on a generated dataset.
    LpTrain(ConfigArg),
    /// Evaluate a checkpoint: Lipschitz and error curves over iterations.
    LpEval(ConfigArg),
    /// Iteration-indexed Lipschitz curve for a scalar operator.
    LipschitzCurve(ConfigArg),
    /// Picard vs Anderson iteration counts over an input grid.
    SolverBench(ConfigArg),
    /// Consolidate summaries under --out into report.json.
    Report,
}

impl Command {
    fn kind(&self) -> Option<(Kind, &ConfigArg)> {
        match self {
            Command::RegularOp(c) => Some((Kind::RegularOp, c)),
            Command::ReciprocalDemo(c) => Some((Kind::ReciprocalDemo, c)),
            Command::Manifold(c) => Some((Kind::Manifold, c)),
            Command::LpGenerate(c) => Some((Kind::LpGenerate, c)),
            Command::LpTrain(c) => Some((Kind::LpTrain, c)),
            Command::LpEval(c) => Some((Kind::LpEval, c)),
            Command::LipschitzCurve(c) => Some((Kind::LipschitzCurve, c)),
            Command::SolverBench(c) => Some((Kind::SolverBench, c)),
            Command::Report => None,
        }
    }
}

fn seed_from_env() -> Result<Option<u64>, RunError> {
    match std::env::var("FIXPOINT_LAB_SEED") {
        Ok(s) => s.trim().parse::<u64>().map(Some).map_err(|_| {
            RunError::Validation(format!("FIXPOINT_LAB_SEED must be a u64, got {s:?}"))
        }),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(RunError::Validation(format!("FIXPOINT_LAB_SEED unreadable: {e}"))),
    }
}

fn dispatch(cli: &Cli) -> Result<String, RunError> {
    match cli.command.kind() {
        Some((kind, cfg_arg)) => {
            let seed = seed_from_env()?;
            let out = run_experiment(
                kind,
                &cfg_arg.config,
                cli.out.as_deref(),
                seed,
                cli.threads,
                cli.verbose,
            )?;
            Ok(format!("ok experiment={} out={}", kind.label(), out.display()))
        }
        None => {
            let root = cli.out.as_deref().ok_or_else(|| {
                RunError::Validation("report needs --out pointing at the runs directory".into())
            })?;
            report::run_report(root)?;
            Ok(format!("ok experiment=report out={}", root.display()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error kind={} msg={:?}", e.kind_label(), e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
