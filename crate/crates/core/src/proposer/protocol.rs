//! The fenced `proposal` block exchanged with chat models.
//!
//! A reply may contain any prose; the first block opened by a line reading
//! ```` ```proposal ```` and closed by a line reading ```` ``` ```` holds one
//! JSON object. See `PROTOCOL.md` at the repository root for the grammar.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::EditProposal;
use crate::bundle::{EditKind, EditOp, EditPayload, SkillDraft, SkillId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("proposal block at byte {offset}: {reason}")]
pub struct ParseError {
    pub offset: usize,
    pub reason: String,
}

const FENCE_LABEL: &str = "proposal";

#[derive(Deserialize)]
struct WireIn {
    operation: String,
    #[serde(default)]
    targets: Vec<String>,
    #[serde(default)]
    payload: Value,
    #[serde(default)]
    rationale: String,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    optimizer_skill_update: Option<String>,
}

#[derive(Serialize)]
struct WireOut<'a> {
    operation: &'static str,
    targets: &'a [SkillId],
    payload: Value,
    rationale: &'a str,
    description: &'a str,
    optimizer_skill_update: Option<&'a str>,
}

fn is_open_fence(line: &str) -> bool {
    line.trim()
        .strip_prefix("```")
        .is_some_and(|rest| rest.trim() == FENCE_LABEL)
}

/// Byte range of the first proposal block's contents.
fn locate_block(text: &str) -> Result<(usize, usize), ParseError> {
    let mut offset = 0;
    let mut open: Option<(usize, usize)> = None;
    for line in text.split_inclusive('\n') {
        match open {
            None if is_open_fence(line) => open = Some((offset, offset + line.len())),
            Some((_, content)) if line.trim() == "```" => return Ok((content, offset)),
            _ => {}
        }
        offset += line.len();
    }
    match open {
        Some((start, _)) => Err(ParseError {
            offset: start,
            reason: "proposal block is not closed".into(),
        }),
        None => Err(ParseError {
            offset: 0,
            reason: "no ```proposal block found".into(),
        }),
    }
}

/// Byte offset of a 1-based (line, column) position within `text`.
fn position_offset(text: &str, line: usize, column: usize) -> usize {
    let preceding: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (preceding + column.saturating_sub(1)).min(text.len())
}

fn payload_from_value(value: Value) -> Result<Option<EditPayload>, String> {
    let draft = |v: Value| serde_json::from_value::<SkillDraft>(v).map_err(|e| format!("payload skill: {e}"));
    match value {
        Value::Null => Ok(None),
        Value::Object(_) => Ok(Some(EditPayload::Skills(vec![draft(value)?]))),
        Value::Array(items) if items.is_empty() => Ok(Some(EditPayload::Skills(Vec::new()))),
        Value::Array(items) if items.iter().all(Value::is_string) => {
            let ids = items
                .into_iter()
                .map(|v| SkillId::new(v.as_str().unwrap_or_default()).map_err(|e| e.to_string()))
                .collect::<Result<_, _>>()?;
            Ok(Some(EditPayload::Permutation(ids)))
        }
        Value::Array(items) => Ok(Some(EditPayload::Skills(
            items.into_iter().map(draft).collect::<Result<_, _>>()?,
        ))),
        other => Err(format!("payload must be null, an object or an array, got {other}")),
    }
}

fn payload_to_value(kind: EditKind, payload: Option<&EditPayload>) -> Value {
    match payload {
        None => Value::Null,
        Some(EditPayload::Skills(drafts)) => {
            let single = matches!(kind, EditKind::Rewrite | EditKind::Substitute) && drafts.len() == 1;
            if single {
                serde_json::to_value(&drafts[0])
            } else {
                serde_json::to_value(drafts)
            }
            .expect("drafts serialize")
        }
        Some(EditPayload::Permutation(ids)) => serde_json::to_value(ids).expect("ids serialize"),
    }
}

/// Extracts and decodes the first proposal block. Structural checks only;
/// whether the op fits a bundle is decided by `apply_edit`.
pub fn parse_proposal(text: &str) -> Result<EditProposal, ParseError> {
    let (start, end) = locate_block(text)?;
    let body = &text[start..end];
    let at = |reason: String| ParseError { offset: start, reason };

    let wire: WireIn = serde_json::from_str(body).map_err(|e| ParseError {
        offset: start + position_offset(body, e.line(), e.column()),
        reason: e.to_string(),
    })?;
    let kind = EditKind::parse(&wire.operation).ok_or_else(|| at(format!("unknown operation `{}`", wire.operation)))?;
    let targets = wire
        .targets
        .into_iter()
        .map(|t| SkillId::new(t).map_err(|e| at(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let payload = payload_from_value(wire.payload).map_err(at)?;
    if kind == EditKind::Reorder && matches!(payload, Some(EditPayload::Skills(ref d)) if d.is_empty()) {
        return Err(at("REORDER needs a permutation of skill ids".into()));
    }
    let description = wire
        .description
        .unwrap_or_else(|| wire.rationale.lines().next().unwrap_or_default().trim().to_string());

    Ok(EditProposal {
        op: EditOp {
            kind,
            targets,
            payload,
            description,
        },
        rationale: wire.rationale,
        optimizer_skill_update: wire.optimizer_skill_update,
    })
}

/// Renders `proposal` as a fenced block that [`parse_proposal`] reads back.
pub fn render_proposal(proposal: &EditProposal) -> String {
    let op = &proposal.op;
    let wire = WireOut {
        operation: op.kind.as_str(),
        targets: &op.targets,
        payload: payload_to_value(op.kind, op.payload.as_ref()),
        rationale: &proposal.rationale,
        description: &op.description,
        optimizer_skill_update: proposal.optimizer_skill_update.as_deref(),
    };
    let json = serde_json::to_string_pretty(&wire).expect("wire proposal serializes");
    format!("```{FENCE_LABEL}\n{json}\n```\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_prune_block() {
        let text = "I will drop the unused skill.\n\n```proposal\n{\"operation\": \"PRUNE\", \"targets\": [\"b\"], \"payload\": null, \"rationale\": \"unused\"}\n```\nDone.";
        let p = parse_proposal(text).unwrap();
        assert_eq!(p.op.kind, EditKind::Prune);
        assert_eq!(p.op.targets, [SkillId::new("b").unwrap()]);
        assert_eq!(p.op.payload, None);
        assert_eq!(p.op.description, "unused");
        assert_eq!(p.optimizer_skill_update, None);
    }

    #[test]
    fn missing_operation_is_an_error() {
        let text = "```proposal\n{\"targets\": [\"b\"]}\n```\n";
        let err = parse_proposal(text).unwrap_err();
        assert!(err.reason.contains("operation"), "{err}");
        assert!(err.offset >= "```proposal\n".len());
    }

    #[test]
    fn no_block_and_unclosed_block() {
        assert_eq!(parse_proposal("just prose").unwrap_err().offset, 0);
        let err = parse_proposal("intro\n```proposal\n{}\n").unwrap_err();
        assert_eq!(err.offset, 6);
        assert!(err.reason.contains("not closed"));
    }

    #[test]
    fn json_error_offset_points_into_block() {
        let text = "```proposal\n{\n  \"operation\": PRUNE\n}\n```\n";
        let err = parse_proposal(text).unwrap_err();
        assert_eq!(&text[err.offset..err.offset + 1], "P");
    }

    #[test]
    fn other_fences_are_skipped_and_unknown_keys_ignored() {
        let text = "```json\n{}\n```\n```proposal\n{\"operation\": \"reorder\", \"payload\": [\"b\", \"a\"], \"confidence\": 0.9}\n```\n";
        let p = parse_proposal(text).unwrap();
        assert_eq!(p.op.kind, EditKind::Reorder);
        assert_eq!(
            p.op.payload,
            Some(EditPayload::Permutation(vec![
                SkillId::new("b").unwrap(),
                SkillId::new("a").unwrap()
            ]))
        );
    }

    #[test]
    fn rewrite_payload_object() {
        let text = "```proposal\n{\"operation\": \"REWRITE\", \"targets\": [\"a\"], \"payload\": {\"name\": \"A\", \"description\": \"d\", \"body\": \"short\"}, \"rationale\": \"r\", \"description\": \"Skill rewriting\", \"optimizer_skill_update\": \"new text\"}\n```";
        let p = parse_proposal(text).unwrap();
        let Some(EditPayload::Skills(d)) = &p.op.payload else {
            panic!()
        };
        assert_eq!(d[0].body, "short");
        assert_eq!(p.optimizer_skill_update.as_deref(), Some("new text"));
        assert_eq!(parse_proposal(&render_proposal(&p)).unwrap(), p);
    }
}
