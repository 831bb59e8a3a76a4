use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::bundle::SkillBundle;
use crate::evaluation::EvaluationResult;
use crate::moo::{
    default_cost_ceiling, hypervolume_2d, nondominated_sort, nsga2_select, HvPoint, MooError, ObjectiveVector,
    ReferencePoint,
};

/// Slack for comparing pass-rate drops against the guard threshold, so that
/// a drop that is exactly the threshold in decimal is not rejected by
/// floating-point residue.
pub const GUARD_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CandidateStatus {
    Accepted,
    RejectedGuard,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParentPolicy {
    /// Lexicographic best member of the current front.
    #[default]
    Best,
    /// Most recently accepted candidate still in the pool.
    Chain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub bundle: SkillBundle,
    pub result: EvaluationResult,
    pub objective: ObjectiveVector,
    pub generation: u32,
    pub slot: u32,
    pub arrival_index: u64,
    pub status: CandidateStatus,
    pub parent_id: Option<String>,
    pub eval_seed: u64,
}

impl Candidate {
    pub fn is_accepted(&self) -> bool {
        self.status == CandidateStatus::Accepted
    }

    pub fn pass_rate(&self) -> f64 {
        self.result.pass_rate
    }

    pub fn hv_point(&self) -> HvPoint {
        HvPoint::from_tests(self.result.tests_passed, self.result.tests_total, self.result.cost_usd)
    }
}

pub fn candidate_id(arrival_index: u64) -> String {
    format!("c{arrival_index:04}")
}

/// REJECTED_GUARD iff `parent_pass - child_pass > threshold`.
pub fn guard(parent_pass: f64, child_pass: f64, threshold: f64) -> CandidateStatus {
    if parent_pass - child_pass > threshold + GUARD_EPSILON {
        CandidateStatus::RejectedGuard
    } else {
        CandidateStatus::Accepted
    }
}

/// Max pass rate, then min cost, then min runtime, then earliest arrival.
pub fn preference_cmp(a: &Candidate, b: &Candidate) -> Ordering {
    b.result
        .pass_rate
        .total_cmp(&a.result.pass_rate)
        .then(a.result.cost_usd.total_cmp(&b.result.cost_usd))
        .then(a.result.runtime_s.total_cmp(&b.result.runtime_s))
        .then(a.arrival_index.cmp(&b.arrival_index))
}

pub fn lexicographic_best<'a>(candidates: impl IntoIterator<Item = &'a Candidate>) -> Option<&'a Candidate> {
    candidates.into_iter().min_by(|a, b| preference_cmp(a, b))
}

/// Append-only candidate log with the derived selection pool and front.
///
/// The pool holds accepted candidates that survive the optional cap; the
/// Pareto front is front 0 of the pool and is recomputed on every append.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Archive {
    candidates: Vec<Candidate>,
    pool: Vec<usize>,
    front: Vec<usize>,
    cap: Option<usize>,
}

impl Archive {
    pub fn new(cap: Option<usize>) -> Self {
        Self { cap, ..Self::default() }
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.id == id)
    }

    pub fn next_arrival(&self) -> u64 {
        self.candidates.len() as u64
    }

    /// Indices of the selection pool, ascending.
    pub fn pool(&self) -> &[usize] {
        &self.pool
    }

    /// Indices of the current Pareto front, ascending.
    pub fn pareto_front(&self) -> &[usize] {
        &self.front
    }

    pub fn front_candidates(&self) -> impl Iterator<Item = &Candidate> {
        self.front.iter().map(|&i| &self.candidates[i])
    }

    pub fn push(&mut self, candidate: Candidate) {
        let index = self.candidates.len();
        let accepted = candidate.is_accepted();
        self.candidates.push(candidate);
        if accepted {
            self.pool.push(index);
            if let Some(cap) = self.cap {
                if self.pool.len() > cap {
                    let entries: Vec<(ObjectiveVector, u64)> = self
                        .pool
                        .iter()
                        .map(|&i| (self.candidates[i].objective, self.candidates[i].arrival_index))
                        .collect();
                    let mut keep: Vec<usize> = nsga2_select(&entries, cap).into_iter().map(|k| self.pool[k]).collect();
                    keep.sort_unstable();
                    self.pool = keep;
                }
            }
        }
        self.front = front_of(&self.candidates, &self.pool);
    }

    pub fn select_parent(&self, policy: ParentPolicy) -> Option<&Candidate> {
        match policy {
            ParentPolicy::Best => lexicographic_best(self.front_candidates()),
            ParentPolicy::Chain => self.pool.last().map(|&i| &self.candidates[i]),
        }
    }

    pub fn final_selection(&self) -> Option<&Candidate> {
        lexicographic_best(self.front_candidates())
    }

    /// Lineage of `id` through the archive, nearest ancestor first, excluding
    /// the candidate itself.
    pub fn ancestors(&self, id: &str) -> Vec<&Candidate> {
        let mut out = Vec::new();
        let mut next = self.get(id).and_then(|c| c.parent_id.clone());
        while let Some(pid) = next {
            let Some(c) = self.get(&pid) else { break };
            next = c.parent_id.clone();
            out.push(c);
        }
        out
    }

    /// Front HV after each generation, over accepted candidates of that
    /// generation or earlier. The ceiling defaults to `default_cost_ceiling`
    /// over the whole archive.
    pub fn hv_by_generation(&self, cost_ceiling: Option<f64>) -> Result<Vec<f64>, MooError> {
        let points: Vec<HvPoint> = self.candidates.iter().map(Candidate::hv_point).collect();
        let ceiling = cost_ceiling.or_else(|| default_cost_ceiling(&points)).unwrap_or(1.0);
        let last = self.candidates.iter().map(|c| c.generation).max().unwrap_or(0);
        (0..=last)
            .map(|g| {
                let pool: Vec<usize> = (0..self.candidates.len())
                    .filter(|&i| self.candidates[i].is_accepted() && self.candidates[i].generation <= g)
                    .collect();
                let front: Vec<HvPoint> = front_of(&self.candidates, &pool)
                    .into_iter()
                    .map(|i| points[i])
                    .collect();
                hypervolume_2d(&front, ReferencePoint::default(), ceiling).map(|r| r.value)
            })
            .collect()
    }
}

fn front_of(candidates: &[Candidate], pool: &[usize]) -> Vec<usize> {
    let points: Vec<ObjectiveVector> = pool.iter().map(|&i| candidates[i].objective).collect();
    let fa = nondominated_sort(&points);
    pool.iter()
        .zip(fa.front)
        .filter(|&(_, f)| f == 0)
        .map(|(&i, _)| i)
        .collect()
}
