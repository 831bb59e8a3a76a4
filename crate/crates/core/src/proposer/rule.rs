//! Deterministic proposer driven by keyword evidence in failure traces.
//!
//! The operation kind is drawn from a seeded weighted distribution biased
//! toward pruning. When the drawn kind does not apply the proposer falls back
//! through REWRITE, PRUNE and REORDER in that order.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::{with_history_note, EditProposal, ProposalOutcome, ProposalRequest, ProposeError, Proposer};
use crate::bundle::{apply_edit, count_tokens, normalize_token, EditKind, EditOp, SkillBundle, SkillDraft};

pub const PRUNE_DESCRIPTION: &str = "Bundle pruning (remove skill blocks)";
pub const REWRITE_DESCRIPTION: &str = "Skill rewriting (truncate skill body)";
pub const REORDER_DESCRIPTION: &str = "Bundle reordering (move most relevant skill first)";
pub const SUBSTITUTE_DESCRIPTION: &str = "Bundle substitution (restore earlier skill version)";

/// Relative draw weights; they need not sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleWeights {
    pub prune: f64,
    pub rewrite: f64,
    pub reorder: f64,
    pub substitute: f64,
}

impl Default for RuleWeights {
    fn default() -> Self {
        Self {
            prune: 0.5,
            rewrite: 0.15,
            reorder: 0.15,
            substitute: 0.2,
        }
    }
}

const DRAW_ORDER: [EditKind; 4] = [
    EditKind::Prune,
    EditKind::Rewrite,
    EditKind::Reorder,
    EditKind::Substitute,
];
const FALLBACK: [EditKind; 3] = [EditKind::Rewrite, EditKind::Prune, EditKind::Reorder];

#[derive(Debug, Clone, Default)]
pub struct RuleProposer {
    weights: RuleWeights,
}

struct SkillStat {
    index: usize,
    hits: u64,
    tokens: u64,
}

impl RuleProposer {
    pub fn new(weights: RuleWeights) -> Self {
        Self { weights }
    }

    fn draw(&self, seed: u64) -> Result<EditKind, ProposeError> {
        let w = self.weights;
        let dist = WeightedIndex::new([w.prune, w.rewrite, w.reorder, w.substitute])
            .map_err(|e| ProposeError::Failure(format!("invalid rule weights: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(DRAW_ORDER[dist.sample(&mut rng)])
    }

    /// The full proposal for `request`, without the model-call bookkeeping.
    pub fn plan(&self, request: &ProposalRequest<'_>) -> Result<EditProposal, ProposeError> {
        let parent = request.parent;
        if parent.is_empty() {
            return Err(ProposeError::NoValidOperation);
        }
        let keywords = evidence_keywords(&request.evidence.error_traces);
        let stats = skill_stats(parent, &keywords);

        let drawn = self.draw(request.seed)?;
        let chain = std::iter::once(drawn).chain(FALLBACK.into_iter().filter(|k| *k != drawn));
        for kind in chain {
            let planned = match kind {
                EditKind::Prune => plan_prune(parent, &stats),
                EditKind::Rewrite => plan_rewrite(parent, &stats),
                EditKind::Reorder => plan_reorder(parent, &stats),
                EditKind::Substitute => plan_substitute(parent, request.ancestors, &stats),
                EditKind::Expand => None,
            };
            let Some((op, rationale)) = planned else { continue };
            if apply_edit(parent, &op).is_err() {
                continue;
            }
            let note = format!(
                "{} {} (parent pass {:.3}, cost {:.4})",
                op.kind,
                describe_targets(&op, parent),
                request.evidence.pass_rate,
                request.evidence.cost_usd
            );
            return Ok(EditProposal {
                optimizer_skill_update: Some(with_history_note(&request.optimizer_skill.text, &note)),
                op,
                rationale,
            });
        }
        Err(ProposeError::NoValidOperation)
    }
}

impl Proposer for RuleProposer {
    fn propose(&self, request: &ProposalRequest<'_>) -> Result<ProposalOutcome, ProposeError> {
        Ok(ProposalOutcome {
            proposal: self.plan(request)?,
            cost_usd: Decimal::ZERO,
            latency_s: 0.0,
        })
    }
}

fn describe_targets(op: &EditOp, parent: &SkillBundle) -> String {
    if op.targets.is_empty() {
        match op.kind {
            EditKind::Reorder => format!("{} skills", parent.len()),
            _ => String::new(),
        }
    } else {
        op.targets.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(",")
    }
}

/// Terms quoted with single quotes in the traces. When no trace quotes
/// anything, every word of four or more letters is used instead.
pub fn evidence_keywords(traces: &[String]) -> HashSet<String> {
    let mut quoted = HashSet::new();
    for trace in traces {
        for (i, part) in trace.split('\'').enumerate() {
            if i % 2 == 1 {
                let k = normalize_token(part);
                if !k.is_empty() {
                    quoted.insert(k);
                }
            }
        }
    }
    if !quoted.is_empty() {
        return quoted;
    }
    traces
        .iter()
        .flat_map(|t| t.split_whitespace())
        .map(normalize_token)
        .filter(|w| w.chars().filter(|c| c.is_alphabetic()).count() >= 4)
        .collect()
}

fn skill_stats(bundle: &SkillBundle, keywords: &HashSet<String>) -> Vec<SkillStat> {
    bundle
        .skills()
        .iter()
        .enumerate()
        .map(|(index, s)| {
            let text = s.text();
            let hits = text
                .split_whitespace()
                .filter(|t| keywords.contains(&normalize_token(t)))
                .count() as u64;
            SkillStat {
                index,
                hits,
                tokens: s.token_estimate().max(1) as u64,
            }
        })
        .collect()
}

/// Fewest hits per token first; longer skills first among equal densities.
fn least_relevant_first(stats: &[SkillStat]) -> Vec<&SkillStat> {
    let mut order: Vec<&SkillStat> = stats.iter().collect();
    order.sort_by(|a, b| {
        let density = (u128::from(a.hits) * u128::from(b.tokens)).cmp(&(u128::from(b.hits) * u128::from(a.tokens)));
        density.then(b.tokens.cmp(&a.tokens)).then(a.index.cmp(&b.index))
    });
    order
}

fn plan_prune(parent: &SkillBundle, stats: &[SkillStat]) -> Option<(EditOp, String)> {
    if parent.len() < 2 {
        return None;
    }
    let target = least_relevant_first(stats)[0];
    let skill = &parent.skills()[target.index];
    let rationale = format!(
        "`{}` has {} evidence hits over {} tokens, the lowest density in the bundle",
        skill.id(),
        target.hits,
        target.tokens
    );
    Some((EditOp::prune(skill.id().clone(), PRUNE_DESCRIPTION), rationale))
}

/// The first `ceil(n / 2)` whitespace tokens of `body`, with the original
/// spacing between them kept. `None` when the body has fewer than two tokens.
pub fn first_half(body: &str) -> Option<String> {
    let n = count_tokens(body);
    if n < 2 {
        return None;
    }
    let keep = n.div_ceil(2);
    let mut seen = 0;
    let mut in_token = false;
    let mut end = body.len();
    for (i, c) in body.char_indices() {
        if c.is_whitespace() {
            if in_token {
                seen += 1;
                in_token = false;
                if seen == keep {
                    end = i;
                    break;
                }
            }
        } else {
            in_token = true;
        }
    }
    let mut out = body[..end].to_string();
    if body.ends_with('\n') {
        out.push('\n');
    }
    Some(out)
}

fn plan_rewrite(parent: &SkillBundle, stats: &[SkillStat]) -> Option<(EditOp, String)> {
    least_relevant_first(stats).into_iter().find_map(|stat| {
        let skill = &parent.skills()[stat.index];
        let body = first_half(skill.body())?;
        let draft = SkillDraft {
            id: None,
            name: skill.name().to_string(),
            description: skill.description().to_string(),
            body,
        };
        let rationale = format!(
            "`{}` is diluted ({} evidence hits over {} tokens); keep the first half of its body",
            skill.id(),
            stat.hits,
            stat.tokens
        );
        Some((
            EditOp::rewrite(skill.id().clone(), draft, REWRITE_DESCRIPTION),
            rationale,
        ))
    })
}

fn plan_reorder(parent: &SkillBundle, stats: &[SkillStat]) -> Option<(EditOp, String)> {
    let best = stats
        .iter()
        .max_by(|a, b| a.hits.cmp(&b.hits).then(b.index.cmp(&a.index)))?;
    if best.hits == 0 || best.index == 0 {
        return None;
    }
    let ids = parent.skill_ids();
    let mut order = vec![ids[best.index].clone()];
    order.extend(
        ids.iter()
            .enumerate()
            .filter(|&(i, _)| i != best.index)
            .map(|(_, id)| id.clone()),
    );
    let rationale = format!(
        "`{}` matches the most evidence keywords ({}); load it first",
        ids[best.index], best.hits
    );
    Some((EditOp::reorder(order, REORDER_DESCRIPTION), rationale))
}

fn plan_substitute(parent: &SkillBundle, ancestors: &[SkillBundle], stats: &[SkillStat]) -> Option<(EditOp, String)> {
    for stat in least_relevant_first(stats) {
        let skill = &parent.skills()[stat.index];
        let earlier = ancestors
            .iter()
            .find_map(|a| a.skill(skill.id()).filter(|s| s.text() != skill.text()));
        if let Some(earlier) = earlier {
            let rationale = format!(
                "restore the earlier version of `{}` ({} tokens instead of {})",
                skill.id(),
                earlier.token_estimate(),
                skill.token_estimate()
            );
            return Some((
                EditOp::substitute(skill.id().clone(), earlier.to_draft(), SUBSTITUTE_DESCRIPTION),
                rationale,
            ));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{EditPayload, Skill, SkillId};
    use crate::proposer::{FailureEvidence, OptimizerSkill};

    fn skill(id: &str, body: &str) -> Skill {
        Skill::new(SkillId::new(id).unwrap(), id, "d", body)
    }

    fn evidence(traces: &[&str]) -> FailureEvidence {
        FailureEvidence {
            error_traces: traces.iter().map(|s| s.to_string()).collect(),
            pass_rate: 0.5,
            cost_usd: 1.0,
            runtime_s: 10.0,
            generation: 0,
        }
    }

    fn only(kind: EditKind) -> RuleProposer {
        let mut w = RuleWeights {
            prune: 0.0,
            rewrite: 0.0,
            reorder: 0.0,
            substitute: 0.0,
        };
        match kind {
            EditKind::Prune => w.prune = 1.0,
            EditKind::Rewrite => w.rewrite = 1.0,
            EditKind::Reorder => w.reorder = 1.0,
            _ => w.substitute = 1.0,
        }
        RuleProposer::new(w)
    }

    fn plan(p: &RuleProposer, bundle: &SkillBundle, ancestors: &[SkillBundle], traces: &[&str]) -> EditProposal {
        let skill = OptimizerSkill::default();
        let ev = evidence(traces);
        p.plan(&ProposalRequest {
            optimizer_skill: &skill,
            parent: bundle,
            ancestors,
            evidence: &ev,
            seed: 3,
        })
        .unwrap()
    }

    #[test]
    fn prune_targets_skill_without_hits() {
        let b = SkillBundle::new("p", vec![skill("a", "use x here"), skill("b", "nothing relevant")]).unwrap();
        let p = plan(&only(EditKind::Prune), &b, &[], &["t01: no guidance covering 'x'"]);
        assert_eq!(p.op, EditOp::prune(SkillId::new("b").unwrap(), PRUNE_DESCRIPTION));
    }

    #[test]
    fn prune_prefers_longest_among_equal_density() {
        let b = SkillBundle::new("p", vec![skill("a", "short"), skill("b", "much longer body text here")]).unwrap();
        let p = plan(&only(EditKind::Prune), &b, &[], &["t01: 'zzz'"]);
        assert_eq!(p.op.targets[0].as_str(), "b");
    }

    #[test]
    fn prune_on_single_skill_falls_back_to_rewrite() {
        let b = SkillBundle::new("p", vec![skill("a", "one two three four five")]).unwrap();
        let p = plan(&only(EditKind::Prune), &b, &[], &[]);
        assert_eq!(p.op.kind, EditKind::Rewrite);
        let Some(EditPayload::Skills(d)) = &p.op.payload else {
            panic!()
        };
        assert_eq!(d[0].body, "one two three");
    }

    #[test]
    fn single_minimal_skill_has_no_valid_operation() {
        let b = SkillBundle::new("p", vec![skill("a", "x")]).unwrap();
        let ev = evidence(&[]);
        let os = OptimizerSkill::default();
        let req = ProposalRequest {
            optimizer_skill: &os,
            parent: &b,
            ancestors: &[],
            evidence: &ev,
            seed: 0,
        };
        assert!(matches!(
            RuleProposer::default().plan(&req),
            Err(ProposeError::NoValidOperation)
        ));
    }

    #[test]
    fn first_half_keeps_formatting() {
        assert_eq!(first_half("a  b\nc d\n").as_deref(), Some("a  b\n"));
        assert_eq!(first_half("a b c").as_deref(), Some("a b"));
        assert_eq!(first_half("  lead a b c d e"), Some("  lead a b".to_string()));
        assert_eq!(first_half("solo"), None);
    }

    #[test]
    fn reorder_moves_most_relevant_first() {
        let b = SkillBundle::new("p", vec![skill("a", "none"), skill("b", "x y"), skill("c", "x")]).unwrap();
        let p = plan(&only(EditKind::Reorder), &b, &[], &["'x'", "'y'"]);
        let ids: Vec<&str> = match &p.op.payload {
            Some(EditPayload::Permutation(ids)) => ids.iter().map(|i| i.as_str()).collect(),
            _ => panic!(),
        };
        assert_eq!(ids, ["b", "a", "c"]);
    }

    #[test]
    fn substitute_restores_ancestor_version() {
        let old = SkillBundle::new("g0", vec![skill("a", "long original body text"), skill("b", "x")]).unwrap();
        let cur = SkillBundle::new("g1", vec![skill("a", "long body"), skill("b", "x")]).unwrap();
        let p = plan(&only(EditKind::Substitute), &cur, std::slice::from_ref(&old), &["'x'"]);
        assert_eq!(p.op.kind, EditKind::Substitute);
        let child = apply_edit(&cur, &p.op).unwrap();
        assert_eq!(child.skills()[0].body(), "long original body text");
        // Without lineage the draw degrades to REWRITE.
        let p = plan(&only(EditKind::Substitute), &cur, &[], &["'x'"]);
        assert_eq!(p.op.kind, EditKind::Rewrite);
    }

    #[test]
    fn same_seed_same_proposal_and_history_note() {
        let b = SkillBundle::new("p", vec![skill("a", "x y z"), skill("b", "q r s t")]).unwrap();
        let rp = RuleProposer::default();
        let a1 = plan(&rp, &b, &[], &["'x'"]);
        let a2 = plan(&rp, &b, &[], &["'x'"]);
        assert_eq!(a1, a2);
        assert!(a1.optimizer_skill_update.unwrap().contains("## History\n- "));
    }

    #[test]
    fn keyword_fallback_without_quotes() {
        let k = evidence_keywords(&["timeout in the config parser".into()]);
        assert!(k.contains("timeout") && k.contains("parser") && !k.contains("the"));
    }
}
