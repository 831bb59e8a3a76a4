//! Edit proposals: the contract, a deterministic rule-based proposer, a
//! chat-model proposer and the fenced-block wire protocol between them.

mod llm;
mod protocol;
mod rule;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{EditOp, SkillBundle};
use crate::evaluation::EvaluationResult;
use crate::llm_client::LlmError;

pub use llm::{render_template, LlmProposer, DEFAULT_PROMPT_TEMPLATE, OPERATIONS_HELP};
pub use protocol::{parse_proposal, render_proposal, ParseError};
pub use rule::{RuleProposer, RuleWeights};

/// Lines kept under the optimizer skill's history heading.
pub const HISTORY_LIMIT: usize = 20;
const HISTORY_HEADING: &str = "## History";

pub const DEFAULT_OPTIMIZER_SKILL: &str = include_str!("../../templates/optimizer_skill.md");

#[derive(Debug, Error)]
pub enum ProposeError {
    #[error("no valid operation applies to the parent bundle")]
    NoValidOperation,
    #[error("proposer failed: {0}")]
    Failure(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditProposal {
    pub op: EditOp,
    pub rationale: String,
    #[serde(default)]
    pub optimizer_skill_update: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEvidence {
    pub error_traces: Vec<String>,
    pub pass_rate: f64,
    pub cost_usd: f64,
    pub runtime_s: f64,
    pub generation: u32,
}

impl FailureEvidence {
    pub fn from_result(result: &EvaluationResult, generation: u32) -> Self {
        Self {
            error_traces: result.error_traces.clone(),
            pass_rate: result.pass_rate,
            cost_usd: result.cost_usd,
            runtime_s: result.runtime_s,
            generation,
        }
    }

    /// Plain-text rendering used in prompts.
    pub fn render(&self) -> String {
        let mut out = format!(
            "generation: {}\npass_rate: {:.4}\ncost_usd: {:.6}\nruntime_s: {:.2}\n",
            self.generation, self.pass_rate, self.cost_usd, self.runtime_s
        );
        if self.error_traces.is_empty() {
            out.push_str("failing tests: none\n");
        } else {
            out.push_str("failing tests:\n");
            for t in &self.error_traces {
                out.push_str("- ");
                out.push_str(t);
                out.push('\n');
            }
        }
        out
    }
}

/// The evolving prompt that guides proposals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimizerSkill {
    pub version: u32,
    pub text: String,
}

impl Default for OptimizerSkill {
    fn default() -> Self {
        Self {
            version: 0,
            text: DEFAULT_OPTIMIZER_SKILL.to_string(),
        }
    }
}

impl OptimizerSkill {
    pub fn updated(&self, text: String) -> Self {
        Self {
            version: self.version + 1,
            text,
        }
    }
}

/// Appends `note` as a history line, keeping only the last [`HISTORY_LIMIT`]
/// lines under the history heading (created when missing).
pub fn with_history_note(text: &str, note: &str) -> String {
    let note = note.replace('\n', " ");
    let (head, history) = match text.find(HISTORY_HEADING) {
        Some(at) => {
            let rest = &text[at + HISTORY_HEADING.len()..];
            (text[..at].to_string(), rest)
        }
        None => {
            let mut head = text.trim_end().to_string();
            head.push_str("\n\n");
            (head, "")
        }
    };
    let mut lines: Vec<&str> = history.lines().filter(|l| !l.trim().is_empty()).collect();
    let entry = format!("- {note}");
    lines.push(&entry);
    let keep = &lines[lines.len().saturating_sub(HISTORY_LIMIT)..];
    let mut out = head;
    out.push_str(HISTORY_HEADING);
    out.push('\n');
    for l in keep {
        out.push_str(l);
        out.push('\n');
    }
    out
}

pub struct ProposalRequest<'a> {
    pub optimizer_skill: &'a OptimizerSkill,
    pub parent: &'a SkillBundle,
    /// Earlier bundles on the parent's lineage, nearest first.
    pub ancestors: &'a [SkillBundle],
    pub evidence: &'a FailureEvidence,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProposalOutcome {
    pub proposal: EditProposal,
    /// Spend on model calls for this proposal, zero for the rule proposer.
    pub cost_usd: Decimal,
    pub latency_s: f64,
}

/// Turns a parent bundle plus failure evidence into one validated edit.
pub trait Proposer: Send + Sync {
    fn propose(&self, request: &ProposalRequest<'_>) -> Result<ProposalOutcome, ProposeError>;
}
