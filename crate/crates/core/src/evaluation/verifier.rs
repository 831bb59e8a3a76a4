//! Shelling out to an external test harness.
//!
//! The harness writes a report of tab-separated records, one per test:
//!
//! ```text
//! test_id<TAB>pass|fail<TAB>message
//! ```
//!
//! Lines starting with `#` are metadata; `#cost_usd<TAB><value>` lets a harness
//! that runs its own agent report inference spend. Blank lines are ignored.

use std::fs;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use wait_timeout::ChildExt;

use super::{EvalError, EvaluationResult, Evaluator, EvaluatorConfig, TaskSpec, VerifierConfig};
use crate::bundle::{store_bundle, SkillBundle};

#[derive(Debug, Clone, PartialEq)]
pub struct VerifierReport {
    pub passed: Vec<String>,
    /// `(test_id, message)` for each failing test.
    pub failed: Vec<(String, String)>,
    pub cost_usd: Option<f64>,
}

impl VerifierReport {
    pub fn total(&self) -> usize {
        self.passed.len() + self.failed.len()
    }
}

pub fn parse_report(text: &str) -> Result<VerifierReport, EvalError> {
    let mut report = VerifierReport {
        passed: Vec::new(),
        failed: Vec::new(),
        cost_usd: None,
    };
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some(v) = meta.strip_prefix("cost_usd\t") {
                let cost: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| EvalError::VerifierCrash(format!("report line {}: bad cost `{v}`", lineno + 1)))?;
                report.cost_usd = Some(cost);
            }
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let id = fields.next().unwrap_or_default().trim();
        let status = fields.next().map(str::trim);
        let message = fields.next().unwrap_or("").trim();
        match status {
            Some(s) if s.eq_ignore_ascii_case("pass") && !id.is_empty() => report.passed.push(id.to_string()),
            Some(s) if s.eq_ignore_ascii_case("fail") && !id.is_empty() => {
                report.failed.push((id.to_string(), message.to_string()))
            }
            _ => {
                return Err(EvalError::VerifierCrash(format!(
                    "report line {}: expected `test_id<TAB>pass|fail<TAB>message`",
                    lineno + 1
                )))
            }
        }
    }
    if report.total() == 0 {
        return Err(EvalError::VerifierCrash("report contains no test records".into()));
    }
    Ok(report)
}

fn aggregate(
    report: &VerifierReport,
    tests_total: u32,
    runtime_s: f64,
    timed_out: bool,
) -> Result<EvaluationResult, EvalError> {
    if report.total() > tests_total as usize {
        return Err(EvalError::VerifierCrash(format!(
            "report lists {} tests but the task declares {tests_total}",
            report.total()
        )));
    }
    let mut traces: Vec<String> = report
        .failed
        .iter()
        .map(|(id, msg)| {
            if msg.is_empty() {
                id.clone()
            } else {
                format!("{id}: {msg}")
            }
        })
        .collect();
    let missing = tests_total as usize - report.total();
    if missing > 0 {
        traces.push(format!("{missing} tests missing from the report"));
    }
    Ok(EvaluationResult::from_counts(
        report.passed.len() as u32,
        tests_total,
        report.cost_usd.unwrap_or(0.0),
        runtime_s,
        traces,
        timed_out,
    ))
}

/// Runs the verifier on a bundle already stored at `bundle_dir`.
pub(crate) fn run_verifier_at(
    bundle_dir: &Path,
    config: &VerifierConfig,
    task: &TaskSpec,
    scratch: &Path,
    extra_env: &[(&str, &Path)],
) -> Result<EvaluationResult, EvalError> {
    let report_path = scratch.join("report.tsv");
    let stderr_path = scratch.join("verifier.stderr");
    let stderr_file = fs::File::create(&stderr_path)?;
    let start = Instant::now();
    let mut cmd = Command::new(&config.command[0]);
    cmd.args(&config.command[1..])
        .arg(bundle_dir)
        .arg(&config.workspace)
        .arg(&report_path)
        .env("SKILLMOO_TASK_ID", &task.task_id)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(stderr_file);
    for (k, v) in extra_env {
        cmd.env(k, v);
    }
    let mut child = cmd
        .spawn()
        .map_err(|e| EvalError::VerifierCrash(format!("cannot start `{}`: {e}", config.command[0])))?;

    let status = child.wait_timeout(Duration::from_secs_f64(task.timeout_s))?;
    let timed_out = status.is_none();
    if timed_out {
        let _ = child.kill();
        let _ = child.wait();
    }
    let runtime_s = start.elapsed().as_secs_f64();

    let report_text = fs::read_to_string(&report_path).ok();
    if timed_out {
        // A partial report may be truncated mid-line; fall back to zero credit.
        let partial = report_text.as_deref().and_then(|t| parse_report(t).ok());
        return match partial {
            Some(report) => aggregate(&report, task.tests_total, runtime_s, true),
            None => Ok(EvaluationResult::from_counts(
                0,
                task.tests_total,
                0.0,
                runtime_s,
                vec![format!(
                    "verifier timed out after {} s without a report",
                    task.timeout_s
                )],
                true,
            )),
        };
    }
    match report_text {
        Some(text) => aggregate(&parse_report(&text)?, task.tests_total, runtime_s, false),
        None => {
            let stderr = fs::read_to_string(&stderr_path).unwrap_or_default();
            Err(EvalError::VerifierCrash(format!(
                "exited with {} and wrote no report: {}",
                status.map(|s| s.to_string()).unwrap_or_default(),
                stderr.trim()
            )))
        }
    }
}

pub fn run_verifier(bundle: &SkillBundle, task: &TaskSpec) -> Result<EvaluationResult, EvalError> {
    task.validate()?;
    let config = match &task.evaluator {
        EvaluatorConfig::Verifier(v) => v,
        EvaluatorConfig::Simulated(_) => {
            return Err(EvalError::InvalidTask(format!(
                "task `{}` has no verifier command",
                task.task_id
            )))
        }
    };
    let scratch = tempfile::tempdir()?;
    let bundle_dir = scratch.path().join("bundle");
    store_bundle(bundle, &bundle_dir)?;
    run_verifier_at(&bundle_dir, config, task, scratch.path(), &[])
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifierEvaluator;

impl Evaluator for VerifierEvaluator {
    fn evaluate(&self, bundle: &SkillBundle, task: &TaskSpec, _run_seed: u64) -> Result<EvaluationResult, EvalError> {
        run_verifier(bundle, task)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mixed_report() {
        let text = "t1\tpass\t\nt2\tfail\tassertion failed\n\n#cost_usd\t0.25\nt3\tPASS\tok\n";
        let r = parse_report(text).unwrap();
        assert_eq!(r.passed, ["t1", "t3"]);
        assert_eq!(r.failed, [("t2".to_string(), "assertion failed".to_string())]);
        assert_eq!(r.cost_usd, Some(0.25));
    }

    #[test]
    fn aggregate_counts_against_task_total() {
        let mut text = String::new();
        for i in 0..18 {
            text.push_str(&format!("p{i}\tpass\t\n"));
        }
        for i in 0..22 {
            text.push_str(&format!("f{i}\tfail\tboom\n"));
        }
        let r = aggregate(&parse_report(&text).unwrap(), 40, 1.0, false).unwrap();
        assert_eq!(r.pass_rate, 18.0 / 40.0);
        assert_eq!(r.pass_rate, 0.45);
        assert_eq!(r.error_traces.len(), 22);

        let partial = aggregate(&parse_report("a\tpass\t\n").unwrap(), 4, 1.0, false).unwrap();
        assert_eq!(partial.tests_passed, 1);
        assert_eq!(partial.error_traces, ["3 tests missing from the report"]);

        assert!(aggregate(&parse_report(&text).unwrap(), 10, 1.0, false).is_err());
    }

    #[test]
    fn rejects_empty_or_malformed_reports() {
        assert!(matches!(parse_report(""), Err(EvalError::VerifierCrash(_))));
        assert!(matches!(parse_report("\n\n"), Err(EvalError::VerifierCrash(_))));
        assert!(matches!(parse_report("t1 pass"), Err(EvalError::VerifierCrash(_))));
        assert!(matches!(parse_report("t1\tmaybe\tx"), Err(EvalError::VerifierCrash(_))));
    }
}
