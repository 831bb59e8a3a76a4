#![allow(dead_code)]

use std::path::PathBuf;

use skillmoo_core::bundle::{load_bundle, SkillBundle};
use skillmoo_core::evaluation::TaskSpec;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn sim_task() -> TaskSpec {
    let text = std::fs::read_to_string(fixtures().join("tasks/sim_task.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn seed_bundle() -> SkillBundle {
    load_bundle(fixtures().join("bundles/seed")).unwrap()
}
