//! Effective `optimize` settings: flags override the config file, which
//! overrides built-in defaults.

use std::path::Path;

use anyhow::Context;
use clap::ValueEnum;
use serde::Deserialize;
use skillmoo_core::evaluation::DEFAULT_TIMEOUT_S;
use skillmoo_core::search::{ParentPolicy, SearchConfig};

use crate::config_error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EvaluatorKind {
    Sim,
    Verifier,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProposerKind {
    Rule,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PolicyArg {
    Best,
    Chain,
}

impl From<PolicyArg> for ParentPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Best => ParentPolicy::Best,
            PolicyArg::Chain => ParentPolicy::Chain,
        }
    }
}

/// Model settings shared by the LLM solver and the LLM proposer.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmFile {
    pub model: Option<String>,
    pub solver_model: Option<String>,
    pub price_per_1k_input: Option<String>,
    pub price_per_1k_output: Option<String>,
    pub max_retries: Option<u32>,
    pub max_in_flight: Option<usize>,
}

/// The config file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub generations: Option<u32>,
    pub population: Option<u32>,
    pub seed: Option<u64>,
    pub evaluator: Option<EvaluatorKind>,
    pub proposer: Option<ProposerKind>,
    pub guard_threshold: Option<f64>,
    pub timeout_s: Option<f64>,
    pub jobs: Option<usize>,
    pub label: Option<String>,
    pub parent_policy: Option<PolicyArg>,
    pub archive_cap: Option<usize>,
    pub prompt_template: Option<String>,
    pub optimizer_skill: Option<String>,
    #[serde(default)]
    pub llm: LlmFile,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(|e| config_error(format!("{e:#}")))?;
        toml::from_str(&text).map_err(|e| config_error(format!("config {}: {e}", path.display())))
    }

    /// Values given on the command line replace the file's.
    pub fn overlay(mut self, flags: FileConfig) -> Self {
        macro_rules! take {
            ($($field:ident),*) => {$(
                if flags.$field.is_some() {
                    self.$field = flags.$field;
                }
            )*};
        }
        take!(
            generations,
            population,
            seed,
            evaluator,
            proposer,
            guard_threshold,
            timeout_s,
            jobs,
            label,
            parent_policy,
            archive_cap,
            prompt_template,
            optimizer_skill
        );
        let (mut llm, f) = (self.llm, flags.llm);
        macro_rules! take_llm {
            ($($field:ident),*) => {$(
                if f.$field.is_some() {
                    llm.$field = f.$field;
                }
            )*};
        }
        take_llm!(
            model,
            solver_model,
            price_per_1k_input,
            price_per_1k_output,
            max_retries,
            max_in_flight
        );
        self.llm = llm;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub search: SearchConfig,
    pub evaluator: EvaluatorKind,
    pub proposer: ProposerKind,
    pub timeout_s: f64,
    pub prompt_template: Option<String>,
    pub optimizer_skill: Option<String>,
    pub llm: LlmFile,
}

impl Settings {
    pub fn resolve(file: FileConfig) -> Self {
        let d = SearchConfig::default();
        Self {
            search: SearchConfig {
                generations: file.generations.unwrap_or(d.generations),
                population: file.population.unwrap_or(d.population),
                guard_drop_threshold: file.guard_threshold.unwrap_or(d.guard_drop_threshold),
                seed: file.seed.unwrap_or(d.seed),
                parent_policy: file.parent_policy.map(Into::into).unwrap_or(d.parent_policy),
                archive_cap: file.archive_cap.or(d.archive_cap),
                jobs: file.jobs.unwrap_or(d.jobs),
                label: file.label.unwrap_or(d.label),
            },
            evaluator: file.evaluator.unwrap_or(EvaluatorKind::Sim),
            proposer: file.proposer.unwrap_or(ProposerKind::Rule),
            timeout_s: file.timeout_s.unwrap_or(DEFAULT_TIMEOUT_S),
            prompt_template: file.prompt_template,
            optimizer_skill: file.optimizer_skill,
            llm: file.llm,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beats_defaults() {
        let file: FileConfig = toml::from_str(
            "generations = 8\nseed = 3\nevaluator = \"verifier\"\n[llm]\nmodel = \"a\"\nmax_retries = 2\n",
        )
        .unwrap();
        let flags = FileConfig {
            seed: Some(9),
            llm: LlmFile {
                model: Some("b".into()),
                ..LlmFile::default()
            },
            ..FileConfig::default()
        };
        let s = Settings::resolve(file.overlay(flags));
        assert_eq!(s.search.generations, 8);
        assert_eq!(s.search.seed, 9);
        assert_eq!(s.search.population, 1);
        assert_eq!(s.evaluator, EvaluatorKind::Verifier);
        assert_eq!(s.proposer, ProposerKind::Rule);
        assert_eq!(s.llm.model.as_deref(), Some("b"));
        assert_eq!(s.llm.max_retries, Some(2));
        assert_eq!(s.timeout_s, 900.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("generation = 3").is_err());
    }
}
