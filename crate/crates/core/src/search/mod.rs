//! The generation loop.
//!
//! Generation 0 evaluates the seed bundle. Each later generation picks a
//! parent, asks the proposer for `population` edits, evaluates the children
//! (concurrently when `jobs > 1`), applies the pass-rate guard and appends
//! every child to the archive in slot order. The optimizer skill advances one
//! version per generation in which some proposal carried an update; with
//! several slots the last slot's text wins.

mod archive;
mod events;
mod replay;
mod run_dir;
mod seeds;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rust_decimal::prelude::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{apply_edit, BundleError, SkillBundle};
use crate::evaluation::{EvalError, EvaluationResult, Evaluator, TaskSpec};
use crate::llm_client::LlmError;
use crate::moo::ObjectiveVector;
use crate::proposer::{FailureEvidence, OptimizerSkill, ProposalRequest, ProposeError, Proposer};

pub use archive::{
    candidate_id, guard, lexicographic_best, preference_cmp, Archive, Candidate, CandidateStatus, ParentPolicy,
    GUARD_EPSILON,
};
pub use events::{canonicalize_events, parse_events, Event, EventRecord};
pub use replay::{replay_run, ReplayReport};
pub use run_dir::{load_run, FrontEntry, FrontFile, LoadedRun, RunManifest};
pub use seeds::{derive_seed, RunSeeds, SeedStream};

use events::EventLog;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Evaluation(#[from] EvalError),
    #[error(transparent)]
    Proposer(#[from] LlmError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("run directory {0} exists and is not empty")]
    RunDirNotEmpty(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("malformed run directory: {0}")]
    MalformedRun(String),
}

impl SearchError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        SearchError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Including generation 0, the seed evaluation.
    pub generations: u32,
    pub population: u32,
    pub guard_drop_threshold: f64,
    pub seed: u64,
    pub parent_policy: ParentPolicy,
    /// Upper bound on the accepted selection pool; `None` keeps everything.
    pub archive_cap: Option<usize>,
    /// Concurrent child evaluations per generation.
    pub jobs: usize,
    /// Method label used when comparing runs.
    pub label: String,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            generations: 5,
            population: 1,
            guard_drop_threshold: 0.05,
            seed: 0,
            parent_policy: ParentPolicy::Best,
            archive_cap: None,
            jobs: 1,
            label: "skillmoo".into(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::InvalidConfig(m.into()));
        if self.generations < 1 {
            return bad("generations must be at least 1");
        }
        if self.population < 1 {
            return bad("population must be at least 1");
        }
        if !(self.guard_drop_threshold >= 0.0) {
            return bad("guard threshold must be nonnegative");
        }
        if self.archive_cap == Some(0) {
            return bad("archive cap must be at least 1");
        }
        if self.jobs < 1 {
            return bad("jobs must be at least 1");
        }
        Ok(())
    }
}

/// Spend and time outside the solver's own work on the final bundle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Overhead {
    pub seed_eval_cost_usd: f64,
    pub child_eval_cost_usd: f64,
    pub proposal_cost_usd: f64,
    pub eval_runtime_s: f64,
    pub proposal_latency_s: f64,
}

impl Overhead {
    /// Every evaluation and proposal cost of the run, rejected children
    /// included.
    pub fn total_cost_usd(&self) -> f64 {
        self.seed_eval_cost_usd + self.child_eval_cost_usd + self.proposal_cost_usd
    }

    pub fn total_runtime_s(&self) -> f64 {
        self.eval_runtime_s + self.proposal_latency_s
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub manifest: RunManifest,
    pub archive: Archive,
    pub events: Vec<EventRecord>,
    pub final_id: String,
    pub optimizer_skill: OptimizerSkill,
    pub overhead: Overhead,
}

impl RunRecord {
    pub fn final_candidate(&self) -> &Candidate {
        self.archive.get(&self.final_id).expect("final candidate is archived")
    }

    pub fn seed_candidate(&self) -> &Candidate {
        &self.archive.candidates()[0]
    }

    pub fn proposal_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.event, Event::Proposal { .. }))
            .count()
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn new_candidate(
    archive: &Archive,
    bundle: SkillBundle,
    result: EvaluationResult,
    generation: u32,
    slot: u32,
    status: CandidateStatus,
    parent_id: Option<String>,
    eval_seed: u64,
) -> Candidate {
    let arrival_index = archive.next_arrival();
    Candidate {
        id: candidate_id(arrival_index),
        objective: ObjectiveVector::new(result.pass_rate, result.cost_usd),
        bundle,
        result,
        generation,
        slot,
        arrival_index,
        status,
        parent_id,
        eval_seed,
    }
}

/// Evaluates `jobs` in order of index on up to `workers` threads.
fn evaluate_all(
    evaluator: &dyn Evaluator,
    task: &TaskSpec,
    jobs: &[(u64, &SkillBundle)],
    workers: usize,
) -> Vec<Result<EvaluationResult, EvalError>> {
    if workers <= 1 || jobs.len() <= 1 {
        return jobs
            .iter()
            .map(|(seed, b)| evaluator.evaluate(b, task, *seed))
            .collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<EvaluationResult, EvalError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers.min(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((seed, bundle)) = jobs.get(i) else { break };
                let r = evaluator.evaluate(bundle, task, *seed);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every job ran"))
        .collect()
}

pub struct Search<'a> {
    task: &'a TaskSpec,
    seed_bundle: SkillBundle,
    config: SearchConfig,
    evaluator: &'a dyn Evaluator,
    proposer: &'a dyn Proposer,
    optimizer_skill: OptimizerSkill,
    run_dir: Option<PathBuf>,
    components: BTreeMap<String, String>,
}

impl<'a> Search<'a> {
    pub fn new(
        task: &'a TaskSpec,
        seed_bundle: SkillBundle,
        config: SearchConfig,
        evaluator: &'a dyn Evaluator,
        proposer: &'a dyn Proposer,
    ) -> Self {
        Self {
            task,
            seed_bundle,
            config,
            evaluator,
            proposer,
            optimizer_skill: OptimizerSkill::default(),
            run_dir: None,
            components: BTreeMap::new(),
        }
    }

    pub fn optimizer_skill(mut self, skill: OptimizerSkill) -> Self {
        self.optimizer_skill = skill;
        self
    }

    /// Persists the run under `dir`, which must be absent or empty.
    pub fn run_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.run_dir = Some(dir.into());
        self
    }

    /// Free-form component labels echoed into `run.json` (evaluator, proposer,
    /// model names).
    pub fn component(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.components.insert(key.into(), value.into());
        self
    }

    pub fn run(self) -> Result<RunRecord, SearchError> {
        self.config.validate()?;
        self.task.validate()?;
        let config = &self.config;
        let seeds = RunSeeds::new(config.seed);
        let manifest = RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            label: config.label.clone(),
            task: self.task.clone(),
            config: config.clone(),
            seeds,
            seed_bundle_id: self.seed_bundle.id().to_string(),
            components: self.components.clone(),
        };

        let mut log = match &self.run_dir {
            Some(dir) => {
                run_dir::prepare(dir, &manifest)?;
                let path = dir.join(run_dir::EVENTS_FILE);
                EventLog::to_file(&path).map_err(|e| SearchError::io(&path, e))?
            }
            None => EventLog::new(),
        };
        let emit = |log: &mut EventLog, event: Event| -> Result<(), SearchError> {
            log.emit(event)
                .map_err(|e| SearchError::io(self.run_dir.as_deref().unwrap_or(Path::new("events.jsonl")), e))
        };
        let persist = |c: &Candidate| -> Result<(), SearchError> {
            match &self.run_dir {
                Some(dir) => run_dir::write_candidate(dir, c),
                None => Ok(()),
            }
        };

        let mut archive = Archive::new(config.archive_cap);
        let mut skill = self.optimizer_skill.clone();
        let mut overhead = Overhead::default();

        let seed_eval = seeds.evaluator(0, 0);
        let seed_result = self.evaluator.evaluate(&self.seed_bundle, self.task, seed_eval)?;
        overhead.seed_eval_cost_usd += seed_result.cost_usd;
        overhead.eval_runtime_s += seed_result.runtime_s;
        let seed = new_candidate(
            &archive,
            self.seed_bundle.clone(),
            seed_result,
            0,
            0,
            CandidateStatus::Accepted,
            None,
            seed_eval,
        );
        emit(
            &mut log,
            Event::SeedEval {
                candidate_id: seed.id.clone(),
                bundle_id: seed.bundle.id().to_string(),
                eval_seed: seed_eval,
                result: seed.result.clone(),
            },
        )?;
        persist(&seed)?;
        archive.push(seed);

        for generation in 1..config.generations {
            let parent = archive
                .select_parent(config.parent_policy)
                .expect("the seed keeps the pool non-empty")
                .clone();
            let ancestors: Vec<SkillBundle> = archive
                .ancestors(&parent.id)
                .into_iter()
                .map(|c| c.bundle.clone())
                .collect();
            let evidence = FailureEvidence::from_result(&parent.result, parent.generation);

            let mut children: Vec<(u32, SkillBundle)> = Vec::new();
            let mut update: Option<String> = None;
            for slot in 0..config.population {
                let proposer_seed = seeds.proposer(generation, slot);
                let request = ProposalRequest {
                    optimizer_skill: &skill,
                    parent: &parent.bundle,
                    ancestors: &ancestors,
                    evidence: &evidence,
                    seed: proposer_seed,
                };
                let failed = |reason: String| Event::ProposalFailed {
                    generation,
                    slot,
                    parent_id: parent.id.clone(),
                    proposer_seed,
                    reason,
                };
                let outcome = match self.proposer.propose(&request) {
                    Ok(o) => o,
                    Err(ProposeError::Llm(LlmError::Timeout(t))) => {
                        emit(&mut log, failed(format!("proposer timed out after {t} s")))?;
                        continue;
                    }
                    Err(ProposeError::Llm(e)) => return Err(e.into()),
                    Err(e) => {
                        emit(&mut log, failed(e.to_string()))?;
                        continue;
                    }
                };
                let child = match apply_edit(&parent.bundle, &outcome.proposal.op) {
                    Ok(c) => c,
                    Err(e) => {
                        emit(&mut log, failed(e.to_string()))?;
                        continue;
                    }
                };
                let cost = outcome.cost_usd.to_f64().unwrap_or(0.0);
                overhead.proposal_cost_usd += cost;
                overhead.proposal_latency_s += outcome.latency_s;
                emit(
                    &mut log,
                    Event::Proposal {
                        generation,
                        slot,
                        parent_id: parent.id.clone(),
                        proposer_seed,
                        optimizer_skill_version: skill.version,
                        op: outcome.proposal.op.clone(),
                        rationale: outcome.proposal.rationale.clone(),
                        has_optimizer_skill_update: outcome.proposal.optimizer_skill_update.is_some(),
                        cost_usd: cost,
                        latency_s: outcome.latency_s,
                    },
                )?;
                if let Some(text) = outcome.proposal.optimizer_skill_update {
                    update = Some(text);
                }
                children.push((slot, child));
            }

            let jobs: Vec<(u64, &SkillBundle)> = children
                .iter()
                .map(|(slot, b)| (seeds.evaluator(generation, *slot), b))
                .collect();
            let results = evaluate_all(self.evaluator, self.task, &jobs, config.jobs);
            for ((slot, bundle), result) in children.into_iter().zip(results) {
                let result = result?;
                let eval_seed = seeds.evaluator(generation, slot);
                overhead.child_eval_cost_usd += result.cost_usd;
                overhead.eval_runtime_s += result.runtime_s;
                let status = guard(parent.result.pass_rate, result.pass_rate, config.guard_drop_threshold);
                let child = new_candidate(
                    &archive,
                    bundle,
                    result,
                    generation,
                    slot,
                    status,
                    Some(parent.id.clone()),
                    eval_seed,
                );
                emit(
                    &mut log,
                    Event::ChildEval {
                        generation,
                        slot,
                        candidate_id: child.id.clone(),
                        parent_id: parent.id.clone(),
                        bundle_id: child.bundle.id().to_string(),
                        eval_seed,
                        result: child.result.clone(),
                    },
                )?;
                emit(
                    &mut log,
                    Event::GuardDecision {
                        candidate_id: child.id.clone(),
                        parent_id: parent.id.clone(),
                        parent_pass_rate: parent.result.pass_rate,
                        child_pass_rate: child.result.pass_rate,
                        threshold: config.guard_drop_threshold,
                        status,
                    },
                )?;
                persist(&child)?;
                archive.push(child);
            }

            if let Some(text) = update {
                skill = skill.updated(text);
                emit(
                    &mut log,
                    Event::OptimizerSkillUpdate {
                        generation,
                        version: skill.version,
                        text: skill.text.clone(),
                    },
                )?;
            }
        }

        let chosen = archive.final_selection().expect("the pool is never empty").clone();
        let front: Vec<String> = archive.front_candidates().map(|c| c.id.clone()).collect();
        emit(
            &mut log,
            Event::FinalSelection {
                candidate_id: chosen.id.clone(),
                pass_rate: chosen.result.pass_rate,
                cost_usd: chosen.result.cost_usd,
                runtime_s: chosen.result.runtime_s,
                front,
            },
        )?;
        if let Some(dir) = &self.run_dir {
            run_dir::write_front(dir, &archive, &chosen.id, &overhead, &skill)?;
        }

        Ok(RunRecord {
            manifest,
            archive,
            events: log.into_records(),
            final_id: chosen.id,
            optimizer_skill: skill,
            overhead,
        })
    }
}

/// Runs a search in memory without a run directory.
pub fn run_search(
    task: &TaskSpec,
    seed_bundle: SkillBundle,
    config: SearchConfig,
    evaluator: &dyn Evaluator,
    proposer: &dyn Proposer,
) -> Result<RunRecord, SearchError> {
    Search::new(task, seed_bundle, config, evaluator, proposer).run()
}
