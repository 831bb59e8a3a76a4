//! The run's event log, one JSON object per line in `events.jsonl`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::archive::CandidateStatus;
use crate::bundle::EditOp;
use crate::evaluation::EvaluationResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    SeedEval {
        candidate_id: String,
        bundle_id: String,
        eval_seed: u64,
        result: EvaluationResult,
    },
    Proposal {
        generation: u32,
        slot: u32,
        parent_id: String,
        proposer_seed: u64,
        optimizer_skill_version: u32,
        op: EditOp,
        rationale: String,
        has_optimizer_skill_update: bool,
        cost_usd: f64,
        latency_s: f64,
    },
    ProposalFailed {
        generation: u32,
        slot: u32,
        parent_id: String,
        proposer_seed: u64,
        reason: String,
    },
    ChildEval {
        generation: u32,
        slot: u32,
        candidate_id: String,
        parent_id: String,
        bundle_id: String,
        eval_seed: u64,
        result: EvaluationResult,
    },
    GuardDecision {
        candidate_id: String,
        parent_id: String,
        parent_pass_rate: f64,
        child_pass_rate: f64,
        threshold: f64,
        status: CandidateStatus,
    },
    OptimizerSkillUpdate {
        generation: u32,
        version: u32,
        text: String,
    },
    FinalSelection {
        candidate_id: String,
        pass_rate: f64,
        cost_usd: f64,
        runtime_s: f64,
        front: Vec<String>,
    },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::SeedEval { .. } => "seed_eval",
            Event::Proposal { .. } => "proposal",
            Event::ProposalFailed { .. } => "proposal_failed",
            Event::ChildEval { .. } => "child_eval",
            Event::GuardDecision { .. } => "guard_decision",
            Event::OptimizerSkillUpdate { .. } => "optimizer_skill_update",
            Event::FinalSelection { .. } => "final_selection",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub ts: String,
    #[serde(flatten)]
    pub event: Event,
}

pub(crate) struct EventLog {
    records: Vec<EventRecord>,
    file: Option<BufWriter<File>>,
}

impl EventLog {
    pub(crate) fn new() -> Self {
        Self {
            records: Vec::new(),
            file: None,
        }
    }

    pub(crate) fn to_file(path: &Path) -> std::io::Result<Self> {
        Ok(Self {
            records: Vec::new(),
            file: Some(BufWriter::new(File::create(path)?)),
        })
    }

    /// Records `event` and, with a file attached, writes and flushes its line.
    pub(crate) fn emit(&mut self, event: Event) -> std::io::Result<()> {
        let record = EventRecord {
            seq: self.records.len() as u64,
            ts: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            event,
        };
        if let Some(f) = &mut self.file {
            serde_json::to_writer(&mut *f, &record)?;
            f.write_all(b"\n")?;
            f.flush()?;
        }
        self.records.push(record);
        Ok(())
    }

    pub(crate) fn into_records(self) -> Vec<EventRecord> {
        self.records
    }
}

/// Parses `events.jsonl` content.
pub fn parse_events(text: &str) -> Result<Vec<EventRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Blanks every `ts` field so logs from different runs can be compared
/// byte for byte. Keys are re-emitted in sorted order.
pub fn canonicalize_events(text: &str) -> Result<String, serde_json::Error> {
    let mut out = String::with_capacity(text.len());
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let mut v: Value = serde_json::from_str(line)?;
        if let Some(ts) = v.get_mut("ts") {
            *ts = Value::String(String::new());
        }
        out.push_str(&serde_json::to_string(&v)?);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_round_trip_with_flattened_tag() {
        let rec = EventRecord {
            seq: 3,
            ts: "2026-01-01T00:00:00.000Z".into(),
            event: Event::GuardDecision {
                candidate_id: "c0001".into(),
                parent_id: "c0000".into(),
                parent_pass_rate: 0.39,
                child_pass_rate: 0.33,
                threshold: 0.05,
                status: CandidateStatus::RejectedGuard,
            },
        };
        let line = serde_json::to_string(&rec).unwrap();
        assert!(line.contains("\"event\":\"guard_decision\""));
        assert!(line.contains("\"status\":\"REJECTED_GUARD\""));
        assert_eq!(parse_events(&line).unwrap(), vec![rec]);
    }

    #[test]
    fn canonicalization_blanks_timestamps_only() {
        let a = "{\"seq\":0,\"ts\":\"2026-01-01T00:00:00.000Z\",\"event\":\"x\"}\n";
        let b = "{\"seq\":0,\"ts\":\"2027-05-05T10:00:00.000Z\",\"event\":\"x\"}\n";
        assert_eq!(canonicalize_events(a).unwrap(), canonicalize_events(b).unwrap());
        let c = "{\"seq\":1,\"ts\":\"2026-01-01T00:00:00.000Z\",\"event\":\"x\"}\n";
        assert_ne!(canonicalize_events(a).unwrap(), canonicalize_events(c).unwrap());
    }
}
