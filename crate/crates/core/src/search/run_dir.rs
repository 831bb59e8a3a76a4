//! On-disk layout of a run:
//!
//! ```text
//! run.json                 config echo, task, seeds, versions
//! events.jsonl             one EventRecord per line
//! candidates/<id>/         candidate.json and the stored bundle/
//! front.json               final front, selection and overhead
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{parse_events, Archive, Candidate, EventRecord, Overhead, RunSeeds, SearchConfig, SearchError};
use crate::bundle::store_bundle;
use crate::evaluation::TaskSpec;
use crate::proposer::OptimizerSkill;

pub(crate) const RUN_FILE: &str = "run.json";
pub(crate) const EVENTS_FILE: &str = "events.jsonl";
pub(crate) const FRONT_FILE: &str = "front.json";
pub(crate) const CANDIDATES_DIR: &str = "candidates";
pub(crate) const CANDIDATE_FILE: &str = "candidate.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub label: String,
    pub task: TaskSpec,
    pub config: SearchConfig,
    pub seeds: RunSeeds,
    pub seed_bundle_id: String,
    #[serde(default)]
    pub components: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontEntry {
    pub id: String,
    pub generation: u32,
    pub pass_rate: f64,
    pub tests_passed: u32,
    pub tests_total: u32,
    pub cost_usd: f64,
    pub runtime_s: f64,
}

impl FrontEntry {
    fn of(c: &Candidate) -> Self {
        Self {
            id: c.id.clone(),
            generation: c.generation,
            pass_rate: c.result.pass_rate,
            tests_passed: c.result.tests_passed,
            tests_total: c.result.tests_total,
            cost_usd: c.result.cost_usd,
            runtime_s: c.result.runtime_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontFile {
    pub final_id: String,
    pub front: Vec<FrontEntry>,
    pub overhead: Overhead,
    pub optimizer_skill_version: u32,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), SearchError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| SearchError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| SearchError::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, SearchError> {
    let text = fs::read_to_string(path).map_err(|e| SearchError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| SearchError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn prepare(dir: &Path, manifest: &RunManifest) -> Result<(), SearchError> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| SearchError::io(dir, e))?;
        if entries.next().is_some() {
            return Err(SearchError::RunDirNotEmpty(dir.to_path_buf()));
        }
    }
    let candidates = dir.join(CANDIDATES_DIR);
    fs::create_dir_all(&candidates).map_err(|e| SearchError::io(&candidates, e))?;
    write_json(&dir.join(RUN_FILE), manifest)
}

pub(crate) fn candidate_json(c: &Candidate) -> String {
    let mut text = serde_json::to_string_pretty(c).expect("candidates serialize");
    text.push('\n');
    text
}

pub(crate) fn write_candidate(dir: &Path, c: &Candidate) -> Result<(), SearchError> {
    let cdir = dir.join(CANDIDATES_DIR).join(&c.id);
    fs::create_dir_all(&cdir).map_err(|e| SearchError::io(&cdir, e))?;
    let path = cdir.join(CANDIDATE_FILE);
    fs::write(&path, candidate_json(c)).map_err(|e| SearchError::io(&path, e))?;
    store_bundle(&c.bundle, cdir.join("bundle"))?;
    Ok(())
}

pub(crate) fn write_front(
    dir: &Path,
    archive: &Archive,
    final_id: &str,
    overhead: &Overhead,
    skill: &OptimizerSkill,
) -> Result<(), SearchError> {
    let front = FrontFile {
        final_id: final_id.to_string(),
        front: archive.front_candidates().map(FrontEntry::of).collect(),
        overhead: *overhead,
        optimizer_skill_version: skill.version,
    };
    write_json(&dir.join(FRONT_FILE), &front)
}

/// A completed run read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub events: Vec<EventRecord>,
    /// Ordered by arrival.
    pub candidates: Vec<Candidate>,
    pub front: FrontFile,
}

impl LoadedRun {
    pub fn candidate(&self, id: &str) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.id == id)
    }

    pub fn seed_candidate(&self) -> &Candidate {
        &self.candidates[0]
    }

    pub fn final_candidate(&self) -> &Candidate {
        self.candidate(&self.front.final_id).expect("validated on load")
    }

    /// Rebuilds the archive by appending candidates in arrival order.
    pub fn archive(&self) -> Archive {
        let mut a = Archive::new(self.manifest.config.archive_cap);
        for c in &self.candidates {
            a.push(c.clone());
        }
        a
    }

    pub fn candidate_path(&self, id: &str) -> PathBuf {
        self.dir.join(CANDIDATES_DIR).join(id)
    }
}

pub fn load_run(dir: impl AsRef<Path>) -> Result<LoadedRun, SearchError> {
    let dir = dir.as_ref();
    let manifest: RunManifest = read_json(&dir.join(RUN_FILE))?;
    let events_path = dir.join(EVENTS_FILE);
    let text = fs::read_to_string(&events_path).map_err(|e| SearchError::io(&events_path, e))?;
    let events = parse_events(&text).map_err(|source| SearchError::Json {
        path: events_path.clone(),
        source,
    })?;

    let cdir = dir.join(CANDIDATES_DIR);
    let mut candidates = Vec::new();
    for entry in fs::read_dir(&cdir).map_err(|e| SearchError::io(&cdir, e))? {
        let entry = entry.map_err(|e| SearchError::io(&cdir, e))?;
        let path = entry.path().join(CANDIDATE_FILE);
        if path.is_file() {
            candidates.push(read_json::<Candidate>(&path)?);
        }
    }
    candidates.sort_by_key(|c| c.arrival_index);
    if candidates.is_empty() {
        return Err(SearchError::MalformedRun(format!(
            "{} holds no candidates",
            cdir.display()
        )));
    }
    if candidates.iter().enumerate().any(|(i, c)| c.arrival_index != i as u64) {
        return Err(SearchError::MalformedRun(
            "candidate arrival indices are not contiguous".into(),
        ));
    }

    let front: FrontFile = read_json(&dir.join(FRONT_FILE))?;
    if !candidates.iter().any(|c| c.id == front.final_id) {
        return Err(SearchError::MalformedRun(format!(
            "final candidate {} is not archived",
            front.final_id
        )));
    }
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        manifest,
        events,
        candidates,
        front,
    })
}
