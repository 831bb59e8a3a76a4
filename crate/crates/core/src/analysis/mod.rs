//! Cross-run statistics: summaries, Scott-Knott ESD ranks, efficiency
//! reports and edit-pattern tables.

mod efficiency;
mod patterns;
mod scott_knott;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::moo::MooError;

pub use efficiency::{efficiency_report, EfficiencyReport};
pub use patterns::{edits_from_events, normalize_description, pattern_table, BaselineMetrics, EditOutcome, PatternRow};
pub use scott_knott::{scott_knott_esd, RankAssignment, ScottKnottConfig, Transform};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("baseline hypervolume is zero; relative improvement is unbounded")]
    ZeroBaseline,
    #[error("hypervolume did not improve (delta {0:.4}%); cost per improvement is undefined")]
    NoHvGain(f64),
    #[error("no baseline metrics to compare edits against")]
    MissingBaseline,
    #[error("group `{0}` needs at least two observations")]
    TooFewObservations(String),
    #[error("no groups to rank")]
    NoGroups,
    #[error("invalid analysis config: {0}")]
    InvalidConfig(String),
}

impl From<MooError> for AnalysisError {
    fn from(e: MooError) -> Self {
        match e {
            MooError::ZeroBaseline => AnalysisError::ZeroBaseline,
            MooError::InvalidCeiling(c) => AnalysisError::InvalidConfig(format!("cost ceiling {c}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); zero when n = 1.
    pub sd: f64,
}

impl Summary {
    /// `mean±sd` at the given number of decimals, e.g. `0.97±0.00`.
    pub fn format(&self, decimals: usize) -> String {
        format!("{:.*}±{:.*}", decimals, self.mean, decimals, self.sd)
    }
}

/// `None` for an empty slice.
pub fn summarize(values: &[f64]) -> Option<Summary> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n == 1 {
        0.0
    } else {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    Some(Summary { n, mean, sd })
}

/// Final metrics of repeated runs of one method.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSet {
    pub label: String,
    pub pass_rate: Vec<f64>,
    pub cost_usd: Vec<f64>,
    pub runtime_s: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSetSummary {
    pub pass_rate: Summary,
    pub cost_usd: Summary,
    pub runtime_s: Summary,
}

impl RunSet {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, pass_rate: f64, cost_usd: f64, runtime_s: f64) {
        self.pass_rate.push(pass_rate);
        self.cost_usd.push(cost_usd);
        self.runtime_s.push(runtime_s);
    }

    pub fn len(&self) -> usize {
        self.pass_rate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pass_rate.is_empty()
    }

    pub fn summarize(&self) -> Option<RunSetSummary> {
        Some(RunSetSummary {
            pass_rate: summarize(&self.pass_rate)?,
            cost_usd: summarize(&self.cost_usd)?,
            runtime_s: summarize(&self.runtime_s)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_examples() {
        let s = summarize(&[0.37; 10]).unwrap();
        assert!((s.mean - 0.37).abs() < 1e-12);
        assert!(s.sd < 1e-12);
        let s = summarize(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.sd), (2.0, 1.0));
        assert_eq!(summarize(&[5.0]).unwrap().sd, 0.0);
        assert!(summarize(&[]).is_none());
        assert_eq!(summarize(&[0.97; 10]).unwrap().format(2), "0.97±0.00");
    }

    #[test]
    fn runset_summary() {
        let mut r = RunSet::new("skillmoo");
        r.push(0.5, 1.0, 10.0);
        r.push(0.7, 3.0, 20.0);
        let s = r.summarize().unwrap();
        assert!((s.pass_rate.mean - 0.6).abs() < 1e-12);
        assert_eq!(s.cost_usd.mean, 2.0);
        assert_eq!(r.len(), 2);
    }
}
