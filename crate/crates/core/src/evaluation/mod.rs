//! Evaluating a bundle on a task: pass rate, cost, runtime and failure traces.

mod llm_solver;
mod sim;
mod verifier;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{BundleError, SkillBundle};
use crate::llm_client::LlmError;

pub use llm_solver::LlmSolverEvaluator;
pub use sim::{sim_pass_rate, sim_raw_score, simulate, SimulatedEvaluator};
pub use verifier::{parse_report, run_verifier, VerifierEvaluator, VerifierReport};

pub const DEFAULT_TESTS_TOTAL: u32 = 40;
pub const DEFAULT_TIMEOUT_S: f64 = 900.0;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("verifier crashed: {0}")]
    VerifierCrash(String),
    #[error(transparent)]
    Endpoint(#[from] LlmError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn default_tests_total() -> u32 {
    DEFAULT_TESTS_TOTAL
}

fn default_timeout_s() -> f64 {
    DEFAULT_TIMEOUT_S
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "default_tests_total")]
    pub tests_total: u32,
    pub evaluator: EvaluatorConfig,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.tests_total < 1 {
            return Err(EvalError::InvalidTask("tests_total must be at least 1".into()));
        }
        if !(self.timeout_s > 0.0) {
            return Err(EvalError::InvalidTask("timeout_s must be positive".into()));
        }
        match &self.evaluator {
            EvaluatorConfig::Simulated(l) => l.validate(),
            EvaluatorConfig::Verifier(v) if v.command.is_empty() => {
                Err(EvalError::InvalidTask("verifier command is empty".into()))
            }
            EvaluatorConfig::Verifier(_) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvaluatorConfig {
    Simulated(SimLandscape),
    Verifier(VerifierConfig),
}

/// External test harness. It is invoked as
/// `command... <bundle_dir> <workspace> <report_path>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierConfig {
    pub command: Vec<String>,
    pub workspace: PathBuf,
}

/// Parameters of the synthetic pass-rate/cost landscape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimLandscape {
    /// Keyword to weight; weights sum to one.
    pub relevant_keywords: BTreeMap<String, f64>,
    #[serde(default)]
    pub distractor_penalty: f64,
    pub reference_length: usize,
    #[serde(default)]
    pub cost_base: f64,
    #[serde(default)]
    pub cost_per_token: f64,
    #[serde(default)]
    pub runtime_base: f64,
    #[serde(default)]
    pub runtime_per_token: f64,
    #[serde(default)]
    pub noise_amplitude: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl SimLandscape {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::InvalidTask(m.to_string()));
        if self.relevant_keywords.is_empty() {
            return bad("landscape needs at least one keyword");
        }
        if self.relevant_keywords.values().any(|w| !(*w >= 0.0)) {
            return bad("keyword weights must be nonnegative");
        }
        if self.relevant_keywords.keys().any(|k| k.split_whitespace().count() != 1) {
            return bad("keywords must be single tokens");
        }
        let total: f64 = self.relevant_keywords.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(&format!("keyword weights sum to {total}, expected 1"));
        }
        if self.reference_length == 0 {
            return bad("reference_length must be positive");
        }
        let nonneg = [
            self.distractor_penalty,
            self.cost_base,
            self.cost_per_token,
            self.runtime_base,
            self.runtime_per_token,
        ];
        if nonneg.iter().any(|v| !(*v >= 0.0)) {
            return bad("penalty, cost and runtime coefficients must be nonnegative");
        }
        if !(0.0..=0.05).contains(&self.noise_amplitude) {
            return bad("noise_amplitude must lie in [0, 0.05]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub pass_rate: f64,
    pub tests_passed: u32,
    pub tests_total: u32,
    pub cost_usd: f64,
    pub runtime_s: f64,
    pub error_traces: Vec<String>,
    #[serde(default)]
    pub timed_out: bool,
}

impl EvaluationResult {
    /// Builds a result from test counts. When tests failed but no traces were
    /// supplied, a generic trace is recorded per missing failure.
    pub fn from_counts(
        tests_passed: u32,
        tests_total: u32,
        cost_usd: f64,
        runtime_s: f64,
        mut error_traces: Vec<String>,
        timed_out: bool,
    ) -> Self {
        assert!(tests_total >= 1 && tests_passed <= tests_total);
        if tests_passed == tests_total {
            error_traces.clear();
        } else if error_traces.is_empty() {
            error_traces.push(format!(
                "{} of {tests_total} tests failed without a report",
                tests_total - tests_passed
            ));
        }
        Self {
            pass_rate: f64::from(tests_passed) / f64::from(tests_total),
            tests_passed,
            tests_total,
            cost_usd,
            runtime_s,
            error_traces,
            timed_out,
        }
    }

    /// Checks the count/rate/trace invariants.
    pub fn is_consistent(&self) -> bool {
        self.tests_total >= 1
            && self.tests_passed <= self.tests_total
            && self.pass_rate == f64::from(self.tests_passed) / f64::from(self.tests_total)
            && self.error_traces.is_empty() == (self.tests_passed == self.tests_total)
            && self.cost_usd >= 0.0
            && self.runtime_s >= 0.0
    }
}

/// Maps a bundle to an evaluation on a task. Implementations hold no shared
/// mutable state beyond configuration and may be called concurrently.
pub trait Evaluator: Send + Sync {
    fn evaluate(&self, bundle: &SkillBundle, task: &TaskSpec, run_seed: u64) -> Result<EvaluationResult, EvalError>;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_define_pass_rate_and_traces() {
        let traces: Vec<String> = (0..3).map(|i| format!("t{i}: fail")).collect();
        let r = EvaluationResult::from_counts(37, 40, 0.1, 2.0, traces, false);
        assert_eq!(r.pass_rate, 0.925);
        assert_eq!(r.error_traces.len(), 3);
        assert!(r.is_consistent());

        let r = EvaluationResult::from_counts(40, 40, 0.0, 0.0, vec!["stale".into()], false);
        assert!(r.error_traces.is_empty());
        assert!(r.is_consistent());

        let r = EvaluationResult::from_counts(0, 40, 0.0, 0.0, vec![], true);
        assert_eq!(r.error_traces.len(), 1);
        assert!(r.is_consistent());
    }

    #[test]
    fn task_defaults_and_validation() {
        let json = r#"{"task_id":"t","evaluator":{"kind":"verifier","command":["true"],"workspace":"/tmp"}}"#;
        let task: TaskSpec = serde_json::from_str(json).unwrap();
        assert_eq!(task.tests_total, 40);
        assert_eq!(task.timeout_s, 900.0);
        task.validate().unwrap();

        let mut bad = task.clone();
        bad.tests_total = 0;
        assert!(bad.validate().is_err());
        let mut bad = task;
        bad.timeout_s = 0.0;
        assert!(bad.validate().is_err());
    }
}
