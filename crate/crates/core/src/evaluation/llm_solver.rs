//! Solver path backed by a chat model.
//!
//! The bundle is rendered into the system prompt, the task description is the
//! user turn, and the reply is written to `solution.md`. The task's verifier
//! then judges the solution; its path is exported as `SKILLMOO_SOLUTION`.

use std::fs;
use std::sync::Arc;
use std::time::Instant;

use rust_decimal::prelude::ToPrimitive;

use super::verifier::run_verifier_at;
use super::{EvalError, EvaluationResult, Evaluator, EvaluatorConfig, TaskSpec};
use crate::bundle::{store_bundle, SkillBundle};
use crate::llm_client::{ChatMessage, ChatModel, LlmError};

pub struct LlmSolverEvaluator {
    model: Arc<dyn ChatModel>,
}

impl LlmSolverEvaluator {
    pub fn new(model: Arc<dyn ChatModel>) -> Self {
        Self { model }
    }

    fn messages(bundle: &SkillBundle, task: &TaskSpec) -> Vec<ChatMessage> {
        let mut system = String::from("You are a coding agent. Solve the task completely.\n");
        if !bundle.is_empty() {
            system.push_str("\nUse the following skills where they apply.\n\n");
            system.push_str(&bundle.render());
        }
        vec![ChatMessage::system(system), ChatMessage::user(task.description.clone())]
    }
}

impl Evaluator for LlmSolverEvaluator {
    fn evaluate(&self, bundle: &SkillBundle, task: &TaskSpec, _run_seed: u64) -> Result<EvaluationResult, EvalError> {
        task.validate()?;
        let EvaluatorConfig::Verifier(verifier) = &task.evaluator else {
            return Err(EvalError::InvalidTask(format!(
                "task `{}` needs a verifier to judge model solutions",
                task.task_id
            )));
        };
        let start = Instant::now();
        let reply = match self.model.chat(&Self::messages(bundle, task)) {
            Ok(r) => r,
            Err(LlmError::Timeout(t)) => {
                return Ok(EvaluationResult::from_counts(
                    0,
                    task.tests_total,
                    0.0,
                    start.elapsed().as_secs_f64(),
                    vec![format!("solver timed out after {t} s")],
                    true,
                ))
            }
            Err(e) => return Err(e.into()),
        };

        let scratch = tempfile::tempdir()?;
        let bundle_dir = scratch.path().join("bundle");
        store_bundle(bundle, &bundle_dir)?;
        let solution = scratch.path().join("solution.md");
        fs::write(&solution, &reply.text)?;

        let mut result = run_verifier_at(
            &bundle_dir,
            verifier,
            task,
            scratch.path(),
            &[("SKILLMOO_SOLUTION", solution.as_path())],
        )?;
        result.cost_usd += reply.usage.cost_usd.to_f64().unwrap_or(0.0);
        result.runtime_s = start.elapsed().as_secs_f64();
        Ok(result)
    }
}
