//! `skillmoo`: optimize skill bundles and analyze the resulting runs.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 runtime failure.

mod compare;
mod inspect;
mod optimize;
mod output;
mod runs;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use skillmoo_core::evaluation::EvalError;
use skillmoo_core::llm_client::LlmError;
use skillmoo_core::search::SearchError;

use output::Format;

#[derive(Parser)]
#[command(
    name = "skillmoo",
    version,
    about = "Multi-objective optimization of agent skill bundles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the search and write a run directory.
    Optimize(Box<optimize::OptimizeArgs>),
    /// Front, final selection and per-generation trajectory of one run.
    Report(ReportArgs),
    /// Mean±SD of final metrics per method label, with Scott-Knott ESD ranks.
    Stats(StatsArgs),
    /// Front hypervolume, optionally against a baseline run.
    Hv(HvArgs),
    /// Edit outcomes grouped by operation description.
    Patterns(PatternsArgs),
    /// Re-evaluate a simulated run and compare it with what was stored.
    Replay(ReplayArgs),
    /// Print a run's event log.
    Events(EventsArgs),
}

#[derive(Args)]
pub(crate) struct FormatArg {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub(crate) format: Format,
}

#[derive(Args)]
pub(crate) struct ReportArgs {
    pub(crate) run: PathBuf,
    #[command(flatten)]
    pub(crate) format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
pub(crate) enum Metric {
    PassRate,
    CostUsd,
    RuntimeS,
}

#[derive(Args)]
pub(crate) struct StatsArgs {
    /// Run directories or glob patterns matching them.
    #[arg(required = true)]
    pub(crate) runs: Vec<String>,
    /// Metric the ranks are computed on.
    #[arg(long, value_enum, default_value_t = Metric::PassRate)]
    pub(crate) metric: Metric,
    #[arg(long, default_value_t = 2)]
    pub(crate) decimals: usize,
    /// Apply log1p to observations before ranking.
    #[arg(long)]
    log1p: bool,
    #[command(flatten)]
    pub(crate) format: FormatArg,
}

#[derive(Args)]
pub(crate) struct HvArgs {
    /// Run directory or front.json.
    pub(crate) target: PathBuf,
    /// Baseline run directory or front.json.
    #[arg(long)]
    pub(crate) baseline: Option<PathBuf>,
    /// Cost mapped to the reference point; defaults to 1.1 x the largest cost seen.
    #[arg(long)]
    pub(crate) cost_ceiling: Option<f64>,
    #[command(flatten)]
    pub(crate) format: FormatArg,
}

#[derive(Args)]
pub(crate) struct PatternsArgs {
    /// Run directories or glob patterns matching them.
    #[arg(required = true)]
    pub(crate) runs: Vec<String>,
    /// Run whose final candidate is the comparison baseline.
    #[arg(long)]
    pub(crate) baseline: Option<PathBuf>,
    #[command(flatten)]
    pub(crate) format: FormatArg,
}

#[derive(Args)]
pub(crate) struct ReplayArgs {
    pub(crate) run: PathBuf,
}

#[derive(Args)]
pub(crate) struct EventsArgs {
    pub(crate) run: PathBuf,
    /// Blank timestamps and sort keys so reruns compare byte for byte.
    #[arg(long)]
    pub(crate) canonical: bool,
}

/// Marks an error as the user's to fix (exit code 2).
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(
            SearchError::InvalidConfig(_)
            | SearchError::RunDirNotEmpty(_)
            | SearchError::Evaluation(EvalError::InvalidTask(_))
            | SearchError::Proposer(LlmError::MissingCredentials | LlmError::InvalidConfig(_)),
        ) = cause.downcast_ref::<SearchError>()
        {
            return 2;
        }
        if let Some(LlmError::MissingCredentials | LlmError::InvalidConfig(_)) = cause.downcast_ref::<LlmError>() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Optimize(a) => optimize::run(*a),
        Command::Report(a) => inspect::report(&a.run, a.format.format),
        Command::Stats(a) => compare::stats(&a),
        Command::Hv(a) => inspect::hv(&a),
        Command::Patterns(a) => compare::patterns(&a),
        Command::Replay(a) => inspect::replay(&a.run),
        Command::Events(a) => inspect::events(&a.run, a.canonical),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
