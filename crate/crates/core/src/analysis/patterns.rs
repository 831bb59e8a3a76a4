//! Edit-pattern tables: evaluated edits grouped by their normalized
//! description and compared against baseline metrics.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::evaluation::EvaluationResult;
use crate::search::{Event, EventRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineMetrics {
    pub pass_rate: f64,
    pub cost_usd: f64,
    pub runtime_s: f64,
}

impl From<&EvaluationResult> for BaselineMetrics {
    fn from(r: &EvaluationResult) -> Self {
        Self {
            pass_rate: r.pass_rate,
            cost_usd: r.cost_usd,
            runtime_s: r.runtime_s,
        }
    }
}

/// One evaluated edit: the op's description and the child's metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditOutcome {
    pub description: String,
    pub pass_rate: f64,
    pub cost_usd: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternRow {
    /// Normalized description shared by the group.
    pub pattern: String,
    /// First raw description seen for the group, for display.
    pub example: String,
    pub edits: usize,
    pub pass_improved: usize,
    pub cost_reduced: usize,
    pub time_reduced: usize,
}

/// Lowercases, turns punctuation into spaces and collapses whitespace.
pub fn normalize_description(text: &str) -> String {
    text.chars()
        .map(|c| {
            if c.is_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                ' '
            }
        })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Pairs each proposal with the evaluation of the child it produced.
/// Proposals whose child was never evaluated are skipped.
pub fn edits_from_events(events: &[EventRecord]) -> Vec<EditOutcome> {
    let mut descriptions: HashMap<(u32, u32), &str> = HashMap::new();
    let mut out = Vec::new();
    for rec in events {
        match &rec.event {
            Event::Proposal {
                generation, slot, op, ..
            } => {
                descriptions.insert((*generation, *slot), &op.description);
            }
            Event::ChildEval {
                generation,
                slot,
                result,
                ..
            } => {
                if let Some(d) = descriptions.get(&(*generation, *slot)) {
                    out.push(EditOutcome {
                        description: d.to_string(),
                        pass_rate: result.pass_rate,
                        cost_usd: result.cost_usd,
                        runtime_s: result.runtime_s,
                    });
                }
            }
            _ => {}
        }
    }
    out
}

/// Groups edits by normalized description, counting strict improvements over
/// `baseline`. Rows are ordered by edit count, then pattern text.
pub fn pattern_table(
    edits: &[EditOutcome],
    baseline: Option<&BaselineMetrics>,
) -> Result<Vec<PatternRow>, AnalysisError> {
    let baseline = baseline.ok_or(AnalysisError::MissingBaseline)?;
    let mut rows: BTreeMap<String, PatternRow> = BTreeMap::new();
    for e in edits {
        let key = normalize_description(&e.description);
        let row = rows.entry(key.clone()).or_insert_with(|| PatternRow {
            pattern: key,
            example: e.description.clone(),
            edits: 0,
            pass_improved: 0,
            cost_reduced: 0,
            time_reduced: 0,
        });
        row.edits += 1;
        row.pass_improved += usize::from(e.pass_rate > baseline.pass_rate);
        row.cost_reduced += usize::from(e.cost_usd < baseline.cost_usd);
        row.time_reduced += usize::from(e.runtime_s < baseline.runtime_s);
    }
    let mut rows: Vec<PatternRow> = rows.into_values().collect();
    rows.sort_by(|a, b| b.edits.cmp(&a.edits).then_with(|| a.pattern.cmp(&b.pattern)));
    Ok(rows)
}
