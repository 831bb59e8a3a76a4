mod common;

use std::fs;
use std::sync::atomic::{AtomicU32, Ordering};

use rust_decimal::Decimal;
use skillmoo_core::bundle::{EditOp, SkillBundle};
use skillmoo_core::evaluation::{EvalError, EvaluationResult, Evaluator, SimulatedEvaluator, TaskSpec};
use skillmoo_core::moo::dominates;
use skillmoo_core::proposer::{EditProposal, ProposalOutcome, ProposalRequest, ProposeError, Proposer, RuleProposer};
use skillmoo_core::search::{
    canonicalize_events, load_run, replay_run, run_search, CandidateStatus, Event, ParentPolicy, Search, SearchConfig,
    SearchError,
};

use common::{seed_bundle, sim_task};

fn config(generations: u32, seed: u64) -> SearchConfig {
    SearchConfig {
        generations,
        seed,
        ..SearchConfig::default()
    }
}

fn run(cfg: SearchConfig) -> skillmoo_core::search::RunRecord {
    run_search(
        &sim_task(),
        seed_bundle(),
        cfg,
        &SimulatedEvaluator,
        &RuleProposer::default(),
    )
    .unwrap()
}

#[test]
fn one_generation_is_seed_only() {
    let rec = run(config(1, 3));
    assert_eq!(rec.archive.len(), 1);
    assert_eq!(rec.final_id, rec.seed_candidate().id);
    assert_eq!(rec.proposal_count(), 0);
}

#[test]
fn default_budget_makes_four_proposals() {
    let rec = run(SearchConfig::default());
    assert_eq!(rec.proposal_count(), 4);
    assert_eq!(rec.archive.len(), 5);
}

#[test]
fn invariants_hold_over_seeds() {
    for s in 0..10 {
        let rec = run(config(10, s));
        let seed = rec.seed_candidate();
        let fin = rec.final_candidate();
        assert!(fin.pass_rate() >= seed.pass_rate(), "seed {s}");
        assert!(fin.is_accepted());

        let hv = rec.archive.hv_by_generation(None).unwrap();
        assert!(hv.windows(2).all(|w| w[1] >= w[0]), "seed {s}: {hv:?}");

        for c in rec.archive.candidates().iter().skip(1) {
            let parent = rec.archive.get(c.parent_id.as_deref().unwrap()).unwrap();
            assert!(parent.is_accepted());
            if c.is_accepted() {
                assert!(c.pass_rate() >= parent.pass_rate() - 0.05 - 1e-9);
            }
            assert_eq!(c.objective.neg_pass, -c.result.pass_rate);
            assert_eq!(c.objective.cost, c.result.cost_usd);
        }

        // Front = accepted candidates nobody accepted dominates.
        let accepted: Vec<_> = rec.archive.candidates().iter().filter(|c| c.is_accepted()).collect();
        let mut expect: Vec<&str> = accepted
            .iter()
            .filter(|c| !accepted.iter().any(|o| dominates(&o.objective, &c.objective)))
            .map(|c| c.id.as_str())
            .collect();
        let mut got: Vec<&str> = rec.archive.front_candidates().map(|c| c.id.as_str()).collect();
        expect.sort();
        got.sort();
        assert_eq!(got, expect);
    }
}

#[test]
fn parallel_evaluation_matches_serial() {
    let serial = run(SearchConfig {
        population: 4,
        ..config(4, 5)
    });
    let parallel = run(SearchConfig {
        population: 4,
        jobs: 4,
        ..config(4, 5)
    });
    let ids = |r: &skillmoo_core::search::RunRecord| -> Vec<(String, String, u64)> {
        r.archive
            .candidates()
            .iter()
            .map(|c| (c.id.clone(), c.bundle.id().to_string(), c.result.pass_rate.to_bits()))
            .collect()
    };
    assert_eq!(ids(&serial), ids(&parallel));
    assert_eq!(serial.archive.len(), 1 + 3 * 4);
}

#[test]
fn run_dir_round_trip_and_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let task = sim_task();
    let rec = Search::new(
        &task,
        seed_bundle(),
        config(6, 2),
        &SimulatedEvaluator,
        &RuleProposer::default(),
    )
    .run_dir(&dir)
    .component("evaluator", "sim")
    .run()
    .unwrap();
    for f in ["run.json", "events.jsonl", "front.json"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let loaded = load_run(&dir).unwrap();
    assert_eq!(loaded.candidates.len(), rec.archive.len());
    assert_eq!(loaded.final_candidate().id, rec.final_id);
    assert_eq!(loaded.manifest.components["evaluator"], "sim");
    assert_eq!(loaded.events.len(), rec.events.len());

    let report = replay_run(&dir, &SimulatedEvaluator).unwrap();
    assert!(report.is_identical(), "{:?}", report.mismatches);
    assert_eq!(report.candidates_checked, rec.archive.len());
}

#[test]
fn replay_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let task = sim_task();
    Search::new(
        &task,
        seed_bundle(),
        config(4, 2),
        &SimulatedEvaluator,
        &RuleProposer::default(),
    )
    .run_dir(&dir)
    .run()
    .unwrap();
    let path = dir.join("candidates/c0001/candidate.json");
    let text = fs::read_to_string(&path)
        .unwrap()
        .replacen("\"generation\": 1", "\"generation\": 7", 1);
    fs::write(&path, text).unwrap();
    let report = replay_run(&dir, &SimulatedEvaluator).unwrap();
    assert!(!report.is_identical());
}

#[test]
fn reruns_give_identical_canonical_events() {
    let tmp = tempfile::tempdir().unwrap();
    let task = sim_task();
    let mut logs = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        Search::new(
            &task,
            seed_bundle(),
            config(5, 7),
            &SimulatedEvaluator,
            &RuleProposer::default(),
        )
        .run_dir(&dir)
        .run()
        .unwrap();
        let text = fs::read_to_string(dir.join("events.jsonl")).unwrap();
        logs.push(canonicalize_events(&text).unwrap());
    }
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn non_empty_run_dir_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("keep.txt"), "x").unwrap();
    let task = sim_task();
    let err = Search::new(
        &task,
        seed_bundle(),
        config(2, 0),
        &SimulatedEvaluator,
        &RuleProposer::default(),
    )
    .run_dir(tmp.path())
    .run()
    .unwrap_err();
    assert!(matches!(err, SearchError::RunDirNotEmpty(_)));
    assert_eq!(fs::read_to_string(tmp.path().join("keep.txt")).unwrap(), "x");
}

#[test]
fn invalid_config_is_rejected() {
    let err = run_search(
        &sim_task(),
        seed_bundle(),
        config(0, 0),
        &SimulatedEvaluator,
        &RuleProposer::default(),
    )
    .unwrap_err();
    assert!(matches!(err, SearchError::InvalidConfig(_)));
}

#[test]
fn archive_cap_bounds_the_pool() {
    let rec = run(SearchConfig {
        population: 3,
        archive_cap: Some(2),
        ..config(5, 1)
    });
    assert!(rec.archive.pool().len() <= 2);
    assert_eq!(rec.archive.len(), 1 + 4 * 3);
}

#[test]
fn chain_policy_follows_last_accepted() {
    let rec = run(SearchConfig {
        parent_policy: ParentPolicy::Chain,
        ..config(6, 4)
    });
    let mut last_accepted = rec.seed_candidate().id.clone();
    for c in rec.archive.candidates().iter().skip(1) {
        assert_eq!(c.parent_id.as_deref(), Some(last_accepted.as_str()));
        if c.is_accepted() {
            last_accepted = c.id.clone();
        }
    }
}

#[test]
fn optimizer_skill_version_counts_updates() {
    let rec = run(config(5, 0));
    let updates = rec
        .events
        .iter()
        .filter(|e| matches!(e.event, Event::OptimizerSkillUpdate { .. }))
        .count();
    assert_eq!(updates, 4);
    assert_eq!(rec.optimizer_skill.version, 4);
}

struct AlwaysFails;

impl Proposer for AlwaysFails {
    fn propose(&self, _: &ProposalRequest<'_>) -> Result<ProposalOutcome, ProposeError> {
        Err(ProposeError::Failure("unparseable reply".into()))
    }
}

#[test]
fn failed_proposals_are_logged_and_skipped() {
    let rec = run_search(
        &sim_task(),
        seed_bundle(),
        config(5, 0),
        &SimulatedEvaluator,
        &AlwaysFails,
    )
    .unwrap();
    let failed = rec
        .events
        .iter()
        .filter(|e| matches!(e.event, Event::ProposalFailed { .. }))
        .count();
    assert_eq!(failed, 4);
    assert_eq!(rec.archive.len(), 1);
}

/// Always prunes the first skill; a bundle of one skill yields an invalid op.
struct PruneFirst;

impl Proposer for PruneFirst {
    fn propose(&self, request: &ProposalRequest<'_>) -> Result<ProposalOutcome, ProposeError> {
        let op = EditOp::prune(request.parent.skills()[0].id().clone(), "drop first");
        Ok(ProposalOutcome {
            proposal: EditProposal {
                op,
                rationale: "test".into(),
                optimizer_skill_update: None,
            },
            cost_usd: Decimal::new(125, 6),
            latency_s: 0.5,
        })
    }
}

/// Times out on every evaluation after the first.
struct TimesOut {
    calls: AtomicU32,
}

impl Evaluator for TimesOut {
    fn evaluate(&self, bundle: &SkillBundle, task: &TaskSpec, seed: u64) -> Result<EvaluationResult, EvalError> {
        if self.calls.fetch_add(1, Ordering::SeqCst) == 0 {
            return SimulatedEvaluator.evaluate(bundle, task, seed);
        }
        Ok(EvaluationResult::from_counts(
            0,
            task.tests_total,
            0.0,
            task.timeout_s,
            vec!["timed out".into()],
            true,
        ))
    }
}

#[test]
fn timed_out_children_stay_archived() {
    let ev = TimesOut {
        calls: AtomicU32::new(0),
    };
    let rec = run_search(&sim_task(), seed_bundle(), config(3, 0), &ev, &PruneFirst).unwrap();
    assert_eq!(rec.archive.len(), 3);
    for c in rec.archive.candidates().iter().skip(1) {
        assert!(c.result.timed_out);
        assert_eq!(c.status, CandidateStatus::RejectedGuard);
    }
    assert_eq!(rec.final_id, "c0000");
    assert!((rec.overhead.proposal_cost_usd - 0.00025).abs() < 1e-12);
    assert!((rec.overhead.proposal_latency_s - 1.0).abs() < 1e-12);
}
