//! Re-executes a persisted run from its event log.
//!
//! The seed bundle is read from the stored candidate directory; every child
//! is rebuilt by applying the recorded op to its recorded parent and
//! evaluated again with the recorded seed. Rebuilt candidates are serialized
//! exactly as the search wrote them and compared byte for byte.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::run_dir::{candidate_json, CANDIDATES_DIR, CANDIDATE_FILE};
use super::{guard, load_run, new_candidate, Archive, CandidateStatus, Event, SearchError};
use crate::bundle::{apply_edit, load_bundle, EditOp};
use crate::evaluation::Evaluator;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayReport {
    pub candidates_checked: usize,
    pub mismatches: Vec<String>,
}

impl ReplayReport {
    pub fn is_identical(&self) -> bool {
        self.mismatches.is_empty()
    }
}

pub fn replay_run(dir: impl AsRef<Path>, evaluator: &dyn Evaluator) -> Result<ReplayReport, SearchError> {
    let dir = dir.as_ref();
    let run = load_run(dir)?;
    let task = &run.manifest.task;
    let threshold = run.manifest.config.guard_drop_threshold;
    let mut archive = Archive::new(run.manifest.config.archive_cap);
    let mut ops: HashMap<(u32, u32), EditOp> = HashMap::new();
    let mut mismatches = Vec::new();

    let check = |archive: &Archive, mismatches: &mut Vec<String>| -> Result<(), SearchError> {
        let rebuilt = archive.candidates().last().expect("just pushed");
        let path = dir.join(CANDIDATES_DIR).join(&rebuilt.id).join(CANDIDATE_FILE);
        let stored = fs::read_to_string(&path).map_err(|e| SearchError::io(&path, e))?;
        if stored != candidate_json(rebuilt) {
            mismatches.push(format!("{} differs from its stored record", rebuilt.id));
        }
        Ok(())
    };

    for record in &run.events {
        match &record.event {
            Event::SeedEval {
                candidate_id,
                eval_seed,
                ..
            } => {
                let bundle = load_bundle(dir.join(CANDIDATES_DIR).join(candidate_id).join("bundle"))?;
                let result = evaluator.evaluate(&bundle, task, *eval_seed)?;
                let c = new_candidate(
                    &archive,
                    bundle,
                    result,
                    0,
                    0,
                    CandidateStatus::Accepted,
                    None,
                    *eval_seed,
                );
                archive.push(c);
                check(&archive, &mut mismatches)?;
            }
            Event::Proposal {
                generation, slot, op, ..
            } => {
                ops.insert((*generation, *slot), op.clone());
            }
            Event::ChildEval {
                generation,
                slot,
                candidate_id,
                parent_id,
                eval_seed,
                ..
            } => {
                let op = ops
                    .get(&(*generation, *slot))
                    .ok_or_else(|| SearchError::MalformedRun(format!("{candidate_id} has no recorded proposal")))?;
                let parent = archive
                    .get(parent_id)
                    .ok_or_else(|| {
                        SearchError::MalformedRun(format!("parent {parent_id} of {candidate_id} is unknown"))
                    })?
                    .clone();
                let bundle = apply_edit(&parent.bundle, op)?;
                let result = evaluator.evaluate(&bundle, task, *eval_seed)?;
                let status = guard(parent.result.pass_rate, result.pass_rate, threshold);
                let c = new_candidate(
                    &archive,
                    bundle,
                    result,
                    *generation,
                    *slot,
                    status,
                    Some(parent.id.clone()),
                    *eval_seed,
                );
                if c.id != *candidate_id {
                    mismatches.push(format!("expected {candidate_id}, rebuilt {}", c.id));
                }
                archive.push(c);
                check(&archive, &mut mismatches)?;
            }
            Event::GuardDecision {
                candidate_id, status, ..
            } => {
                if archive.get(candidate_id).map(|c| c.status) != Some(*status) {
                    mismatches.push(format!("guard decision for {candidate_id} differs"));
                }
            }
            Event::FinalSelection { candidate_id, .. } => {
                let chosen = archive.final_selection().map(|c| c.id.as_str());
                if chosen != Some(candidate_id.as_str()) {
                    mismatches.push(format!(
                        "final selection differs: recorded {candidate_id}, rebuilt {chosen:?}"
                    ));
                }
            }
            Event::ProposalFailed { .. } | Event::OptimizerSkillUpdate { .. } => {}
        }
    }
    if archive.len() != run.candidates.len() {
        mismatches.push(format!(
            "rebuilt {} candidates, the run stored {}",
            archive.len(),
            run.candidates.len()
        ));
    }
    Ok(ReplayReport {
        candidates_checked: archive.len(),
        mismatches,
    })
}
