//! Deterministic stand-in for a verifier.
//!
//! ```text
//! raw  = sum(weight(k) for relevant k present)
//!        - penalty * max(0, tokens - L_ref) / L_ref
//!        + noise * amplitude
//! pass = round(clamp(raw, 0, 1) * tests_total) / tests_total
//! cost = c0 + c1 * tokens          runtime = r0 + r1 * tokens
//! ```
//!
//! `noise` is derived from a hash of (landscape seed, run seed, bundle content)
//! and lies in [-1, 1]. Failing tests are attributed to keywords, uncovered
//! keywords first, so the traces point at missing or diluted guidance.

use std::collections::HashSet;

use super::{EvalError, EvaluationResult, Evaluator, EvaluatorConfig, SimLandscape, TaskSpec};
use crate::bundle::{normalize_token, SkillBundle};
use crate::hashing::sha256_u64;

#[derive(Debug, Clone, Copy, Default)]
pub struct SimulatedEvaluator;

impl Evaluator for SimulatedEvaluator {
    fn evaluate(&self, bundle: &SkillBundle, task: &TaskSpec, run_seed: u64) -> Result<EvaluationResult, EvalError> {
        task.validate()?;
        match &task.evaluator {
            EvaluatorConfig::Simulated(landscape) => Ok(simulate(bundle, landscape, task.tests_total, run_seed)),
            EvaluatorConfig::Verifier(_) => Err(EvalError::InvalidTask(format!(
                "task `{}` has no simulated landscape",
                task.task_id
            ))),
        }
    }
}

fn present_keywords(bundle: &SkillBundle) -> HashSet<String> {
    bundle
        .text()
        .split_whitespace()
        .map(normalize_token)
        .filter(|t| !t.is_empty())
        .collect()
}

fn noise(landscape: &SimLandscape, bundle: &SkillBundle, run_seed: u64) -> f64 {
    let key = format!("{}:{}:{}", landscape.rng_seed, run_seed, bundle.content_hash());
    let bits = sha256_u64(key.as_bytes()) >> 11;
    let unit = bits as f64 / (1u64 << 53) as f64;
    2.0 * unit - 1.0
}

/// Unclamped score before rounding to whole tests.
pub fn sim_raw_score(bundle: &SkillBundle, landscape: &SimLandscape, run_seed: u64) -> f64 {
    let present = present_keywords(bundle);
    let coverage: f64 = landscape
        .relevant_keywords
        .iter()
        .filter(|(k, _)| present.contains(&k.to_lowercase()))
        .map(|(_, w)| w)
        .sum();
    let l_ref = landscape.reference_length as f64;
    let excess = (bundle.token_count() as f64 - l_ref).max(0.0);
    let mut raw = coverage - landscape.distractor_penalty * excess / l_ref;
    if landscape.noise_amplitude > 0.0 {
        raw += noise(landscape, bundle, run_seed) * landscape.noise_amplitude;
    }
    raw
}

fn passed_tests(bundle: &SkillBundle, landscape: &SimLandscape, tests_total: u32, run_seed: u64) -> u32 {
    let raw = sim_raw_score(bundle, landscape, run_seed).clamp(0.0, 1.0);
    (raw * f64::from(tests_total)).round() as u32
}

pub fn sim_pass_rate(bundle: &SkillBundle, landscape: &SimLandscape, tests_total: u32, run_seed: u64) -> f64 {
    f64::from(passed_tests(bundle, landscape, tests_total, run_seed)) / f64::from(tests_total)
}

/// Splits `tests_total` tests across keywords by largest remainder.
/// Keywords are ordered by weight descending, then name.
fn allocate_tests(landscape: &SimLandscape, tests_total: u32) -> Vec<(&str, u32)> {
    let mut kws: Vec<(&str, f64)> = landscape
        .relevant_keywords
        .iter()
        .map(|(k, w)| (k.as_str(), *w))
        .collect();
    kws.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
    let n = f64::from(tests_total);
    let mut counts: Vec<u32> = kws.iter().map(|(_, w)| (w * n).floor() as u32).collect();
    let mut left = tests_total - counts.iter().sum::<u32>();
    let mut by_remainder: Vec<usize> = (0..kws.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = kws[a].1 * n - (kws[a].1 * n).floor();
        let rb = kws[b].1 * n - (kws[b].1 * n).floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for i in by_remainder.into_iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    kws.iter().zip(counts).map(|((k, _), c)| (*k, c)).collect()
}

pub fn simulate(bundle: &SkillBundle, landscape: &SimLandscape, tests_total: u32, run_seed: u64) -> EvaluationResult {
    let tokens = bundle.token_count() as f64;
    let passed = passed_tests(bundle, landscape, tests_total, run_seed);
    let present = present_keywords(bundle);
    let excess = bundle.token_count().saturating_sub(landscape.reference_length);

    let allocation = allocate_tests(landscape, tests_total);
    let mut uncovered = Vec::new();
    let mut covered = Vec::new();
    let mut test_no = 0u32;
    for (kw, count) in allocation {
        for _ in 0..count {
            test_no += 1;
            let slot = (test_no, kw);
            if present.contains(&kw.to_lowercase()) {
                covered.push(slot);
            } else {
                uncovered.push(slot);
            }
        }
    }
    // Covered tests fail starting from the lowest-weight keyword.
    covered.reverse();

    let failing = (tests_total - passed) as usize;
    let traces = uncovered
        .iter()
        .map(|&(n, kw)| format!("t{n:02}: no guidance covering '{kw}'"))
        .chain(covered.iter().map(|&(n, kw)| {
            if excess > 0 {
                format!(
                    "t{n:02}: guidance on '{kw}' diluted by {excess} tokens beyond the {}-token budget",
                    landscape.reference_length
                )
            } else {
                format!("t{n:02}: intermittent failure involving '{kw}'")
            }
        }))
        .take(failing)
        .collect();

    EvaluationResult::from_counts(
        passed,
        tests_total,
        landscape.cost_base + landscape.cost_per_token * tokens,
        landscape.runtime_base + landscape.runtime_per_token * tokens,
        traces,
        false,
    )
}
