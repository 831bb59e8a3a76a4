use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use anyhow::Context;
use clap::Args;
use rust_decimal::Decimal;
use serde::Serialize;
use skillmoo_core::bundle::load_bundle;
use skillmoo_core::evaluation::{
    Evaluator, EvaluatorConfig, LlmSolverEvaluator, SimulatedEvaluator, TaskSpec, VerifierEvaluator,
};
use skillmoo_core::llm_client::{ChatModel, LlmClient, ModelConfig};
use skillmoo_core::proposer::{LlmProposer, OptimizerSkill, Proposer, RuleProposer};
use skillmoo_core::search::Search;

use crate::config_error;
use crate::output::{fmt_f, Format, Table};
use crate::settings::{EvaluatorKind, FileConfig, LlmFile, PolicyArg, ProposerKind, Settings};

#[derive(Args)]
pub struct OptimizeArgs {
    /// Task spec (JSON).
    #[arg(long)]
    task: PathBuf,
    /// Seed bundle directory.
    #[arg(long)]
    bundle: PathBuf,
    /// Run directory to create; must be absent or empty.
    #[arg(long)]
    out: PathBuf,
    /// TOML file with defaults for any of the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generations including the seed evaluation [default: 5].
    #[arg(long)]
    generations: Option<u32>,
    /// Proposals per generation [default: 1].
    #[arg(long)]
    population: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// [default: sim]
    #[arg(long, value_enum)]
    evaluator: Option<EvaluatorKind>,
    /// [default: rule]
    #[arg(long, value_enum)]
    proposer: Option<ProposerKind>,
    /// Largest tolerated pass-rate drop from parent to child [default: 0.05].
    #[arg(long)]
    guard_threshold: Option<f64>,
    /// Per-evaluation and per-request timeout in seconds [default: 900].
    #[arg(long)]
    timeout_s: Option<f64>,
    /// Concurrent child evaluations [default: 1].
    #[arg(long)]
    jobs: Option<usize>,
    /// Method label used by `stats` [default: skillmoo].
    #[arg(long, alias = "method")]
    label: Option<String>,
    /// [default: best]
    #[arg(long, value_enum)]
    parent_policy: Option<PolicyArg>,
    /// Cap on the accepted selection pool (NSGA-II truncation).
    #[arg(long)]
    archive_cap: Option<usize>,
    /// Proposer prompt template file.
    #[arg(long)]
    prompt_template: Option<String>,
    /// Initial optimizer skill file.
    #[arg(long)]
    optimizer_skill: Option<String>,
    /// Model for the LLM proposer (and solver unless --solver-model is set).
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    solver_model: Option<String>,
    /// USD per 1000 prompt tokens.
    #[arg(long)]
    price_in: Option<String>,
    /// USD per 1000 completion tokens.
    #[arg(long)]
    price_out: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

impl OptimizeArgs {
    fn flag_config(&self) -> FileConfig {
        FileConfig {
            generations: self.generations,
            population: self.population,
            seed: self.seed,
            evaluator: self.evaluator,
            proposer: self.proposer,
            guard_threshold: self.guard_threshold,
            timeout_s: self.timeout_s,
            jobs: self.jobs,
            label: self.label.clone(),
            parent_policy: self.parent_policy,
            archive_cap: self.archive_cap,
            prompt_template: self.prompt_template.clone(),
            optimizer_skill: self.optimizer_skill.clone(),
            llm: LlmFile {
                model: self.model.clone(),
                solver_model: self.solver_model.clone(),
                price_per_1k_input: self.price_in.clone(),
                price_per_1k_output: self.price_out.clone(),
                max_retries: None,
                max_in_flight: None,
            },
        }
    }
}

fn read_text(path: &Path, what: &str) -> anyhow::Result<String> {
    fs::read_to_string(path).map_err(|e| config_error(format!("reading {what} {}: {e}", path.display())))
}

fn price(value: Option<&str>, name: &str) -> anyhow::Result<Decimal> {
    match value {
        None => Ok(Decimal::ZERO),
        Some(v) => Decimal::from_str(v.trim()).map_err(|e| config_error(format!("{name} `{v}`: {e}"))),
    }
}

fn model_client(model: &str, settings: &Settings) -> anyhow::Result<Arc<dyn ChatModel>> {
    let llm = &settings.llm;
    let mut cfg = ModelConfig::from_env(model)?.with_prices(
        price(llm.price_per_1k_input.as_deref(), "price_per_1k_input")?,
        price(llm.price_per_1k_output.as_deref(), "price_per_1k_output")?,
    );
    cfg.request_timeout_s = settings.timeout_s;
    if let Some(r) = llm.max_retries {
        cfg.max_retries = r;
    }
    cfg.max_in_flight = llm.max_in_flight.unwrap_or(settings.search.jobs.max(1));
    Ok(Arc::new(LlmClient::new(cfg)?))
}

fn require_model<'a>(name: Option<&'a str>, what: &str) -> anyhow::Result<&'a str> {
    name.ok_or_else(|| config_error(format!("the {what} needs a model name (--model or [llm] model)")))
}

#[derive(Serialize)]
struct Summary {
    run_dir: PathBuf,
    candidates: usize,
    accepted: usize,
    proposals: usize,
    front: Vec<String>,
    final_id: String,
    pass_rate: f64,
    cost_usd: f64,
    runtime_s: f64,
    bundle: PathBuf,
    opt_cost_usd: f64,
    opt_runtime_s: f64,
}

pub fn run(args: OptimizeArgs) -> anyhow::Result<()> {
    let file = match &args.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let settings = Settings::resolve(file.overlay(args.flag_config()));

    let mut task: TaskSpec = serde_json::from_str(&read_text(&args.task, "task")?)
        .map_err(|e| config_error(format!("task {}: {e}", args.task.display())))?;
    task.timeout_s = settings.timeout_s;
    task.validate().map_err(|e| config_error(e.to_string()))?;
    let seed_bundle = load_bundle(&args.bundle)
        .with_context(|| format!("loading bundle {}", args.bundle.display()))
        .map_err(|e| config_error(format!("{e:#}")))?;

    let is_sim = matches!(task.evaluator, EvaluatorConfig::Simulated(_));
    let evaluator: Box<dyn Evaluator> = match settings.evaluator {
        EvaluatorKind::Sim if is_sim => Box::new(SimulatedEvaluator),
        EvaluatorKind::Verifier | EvaluatorKind::Llm if is_sim => {
            return Err(config_error("this task has a simulated landscape; use --evaluator sim"))
        }
        EvaluatorKind::Sim => return Err(config_error("this task has no simulated landscape")),
        EvaluatorKind::Verifier => Box::new(VerifierEvaluator),
        EvaluatorKind::Llm => {
            let llm = &settings.llm;
            let name = require_model(llm.solver_model.as_deref().or(llm.model.as_deref()), "LLM solver")?;
            Box::new(LlmSolverEvaluator::new(model_client(name, &settings)?))
        }
    };
    let proposer: Box<dyn Proposer> = match settings.proposer {
        ProposerKind::Rule => Box::new(RuleProposer::default()),
        ProposerKind::Llm => {
            let name = require_model(settings.llm.model.as_deref(), "LLM proposer")?;
            let client = model_client(name, &settings)?;
            match &settings.prompt_template {
                Some(p) => Box::new(LlmProposer::with_template(client, read_text(Path::new(p), "template")?)),
                None => Box::new(LlmProposer::new(client)),
            }
        }
    };

    let mut search = Search::new(
        &task,
        seed_bundle,
        settings.search.clone(),
        evaluator.as_ref(),
        proposer.as_ref(),
    )
    .run_dir(&args.out)
    .component("evaluator", format!("{:?}", settings.evaluator).to_lowercase())
    .component("proposer", format!("{:?}", settings.proposer).to_lowercase())
    .component("timeout_s", settings.timeout_s.to_string());
    if let Some(p) = &settings.optimizer_skill {
        search = search
            .optimizer_skill(OptimizerSkill {
                version: 0,
                text: read_text(Path::new(p), "optimizer skill")?,
            })
            .component("optimizer_skill", p.clone());
    }
    let llm = &settings.llm;
    for (k, v) in [
        ("model", &llm.model),
        ("solver_model", &llm.solver_model),
        ("price_per_1k_input", &llm.price_per_1k_input),
        ("price_per_1k_output", &llm.price_per_1k_output),
        ("prompt_template", &settings.prompt_template),
    ] {
        if let Some(v) = v {
            search = search.component(k, v.clone());
        }
    }
    let record = search.run()?;

    let fin = record.final_candidate();
    let summary = Summary {
        run_dir: args.out.clone(),
        candidates: record.archive.len(),
        accepted: record.archive.candidates().iter().filter(|c| c.is_accepted()).count(),
        proposals: record.proposal_count(),
        front: record.archive.front_candidates().map(|c| c.id.clone()).collect(),
        final_id: fin.id.clone(),
        pass_rate: fin.result.pass_rate,
        cost_usd: fin.result.cost_usd,
        runtime_s: fin.result.runtime_s,
        bundle: args.out.join("candidates").join(&fin.id).join("bundle"),
        opt_cost_usd: record.overhead.total_cost_usd(),
        opt_runtime_s: record.overhead.total_runtime_s(),
    };
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&summary)?),
        fmt => {
            let mut t = Table::new([
                "final",
                "pass_rate",
                "cost_usd",
                "runtime_s",
                "candidates",
                "accepted",
                "bundle",
            ]);
            t.row([
                summary.final_id.clone(),
                fmt_f(summary.pass_rate, 3),
                fmt_f(summary.cost_usd, 4),
                fmt_f(summary.runtime_s, 2),
                summary.candidates.to_string(),
                summary.accepted.to_string(),
                summary.bundle.display().to_string(),
            ]);
            t.print(fmt)?;
        }
    }
    Ok(())
}
