//! Proposer backed by a chat model.
//!
//! One request per proposal; when the reply cannot be parsed or its op does
//! not apply to the parent, the model gets one follow-up turn explaining the
//! problem before the proposer gives up.

use std::sync::Arc;
use std::time::Instant;

use rust_decimal::Decimal;

use super::{parse_proposal, EditProposal, ProposalOutcome, ProposalRequest, ProposeError, Proposer};
use crate::bundle::apply_edit;
use crate::llm_client::{ChatMessage, ChatModel};

pub const DEFAULT_PROMPT_TEMPLATE: &str = include_str!("../../templates/proposer.txt");
pub const OPERATIONS_HELP: &str = include_str!("../../templates/operations_help.txt");

const SYSTEM_PROMPT: &str =
    "You are a skill optimizer. You edit skill bundles for a coding agent and reply with one proposal block.";

/// Substitutes `{{name}}` placeholders in one pass; values are inserted
/// verbatim and never re-scanned. Unknown placeholders are left in place.
pub fn render_template(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let Some(close) = after.find("}}") else {
            out.push_str(&rest[open..]);
            return out;
        };
        let name = after[..close].trim();
        match values.iter().find(|(k, _)| *k == name) {
            Some((_, v)) => out.push_str(v),
            None => out.push_str(&rest[open..open + 2 + close + 2]),
        }
        rest = &after[close + 2..];
    }
    out.push_str(rest);
    out
}

pub struct LlmProposer {
    model: Arc<dyn ChatModel>,
    template: String,
}

impl LlmProposer {
    pub fn new(model: Arc<dyn ChatModel>) -> Self {
        Self::with_template(model, DEFAULT_PROMPT_TEMPLATE)
    }

    pub fn with_template(model: Arc<dyn ChatModel>, template: impl Into<String>) -> Self {
        Self {
            model,
            template: template.into(),
        }
    }

    pub fn prompt(&self, request: &ProposalRequest<'_>) -> String {
        let bundle_render = request.parent.render();
        let evidence = request.evidence.render();
        render_template(
            &self.template,
            &[
                ("optimizer_skill", &request.optimizer_skill.text),
                ("bundle_render", &bundle_render),
                ("evidence", &evidence),
                ("operations_help", OPERATIONS_HELP),
            ],
        )
    }

    fn check(reply: &str, request: &ProposalRequest<'_>) -> Result<EditProposal, String> {
        let proposal = parse_proposal(reply).map_err(|e| e.to_string())?;
        apply_edit(request.parent, &proposal.op).map_err(|e| format!("the operation does not apply: {e}"))?;
        Ok(proposal)
    }
}

impl Proposer for LlmProposer {
    fn propose(&self, request: &ProposalRequest<'_>) -> Result<ProposalOutcome, ProposeError> {
        let start = Instant::now();
        let mut messages = vec![
            ChatMessage::system(SYSTEM_PROMPT),
            ChatMessage::user(self.prompt(request)),
        ];
        let mut cost = Decimal::ZERO;

        let first = self.model.chat(&messages)?;
        cost += first.usage.cost_usd;
        let problem = match Self::check(&first.text, request) {
            Ok(proposal) => {
                return Ok(ProposalOutcome {
                    proposal,
                    cost_usd: cost,
                    latency_s: start.elapsed().as_secs_f64(),
                })
            }
            Err(problem) => problem,
        };

        messages.push(ChatMessage::assistant(first.text));
        messages.push(ChatMessage::user(format!(
            "Your previous reply could not be used: {problem}\n\
             Reply again with exactly one ```proposal block whose operation applies to the bundle as shown. \
             Valid skill ids: {}.",
            request
                .parent
                .skill_ids()
                .iter()
                .map(|id| id.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        )));
        let second = self.model.chat(&messages)?;
        cost += second.usage.cost_usd;
        match Self::check(&second.text, request) {
            Ok(proposal) => Ok(ProposalOutcome {
                proposal,
                cost_usd: cost,
                latency_s: start.elapsed().as_secs_f64(),
            }),
            Err(again) => Err(ProposeError::Failure(format!(
                "unusable proposal after retry: {again} (first attempt: {problem})"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pass_substitution() {
        let t = "A {{x}} B {{ y }} C {{unknown}} D {{x";
        let out = render_template(t, &[("x", "{{y}}"), ("y", "2")]);
        assert_eq!(out, "A {{y}} B 2 C {{unknown}} D {{x");
    }

    #[test]
    fn default_template_has_all_placeholders() {
        for p in ["optimizer_skill", "bundle_render", "evidence", "operations_help"] {
            assert!(DEFAULT_PROMPT_TEMPLATE.contains(&format!("{{{{{p}}}}}")), "{p}");
        }
    }
}
