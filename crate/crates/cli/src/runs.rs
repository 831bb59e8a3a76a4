//! Locating run directories and reading fronts from disk.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use skillmoo_core::search::{load_run, FrontFile, LoadedRun};

use crate::config_error;

const RUN_FILE: &str = "run.json";

fn is_run(dir: &Path) -> bool {
    dir.join(RUN_FILE).is_file()
}

/// Expands each argument to run directories. An argument may be a run
/// directory, a directory whose immediate children are runs, or a glob.
pub fn expand(args: &[String]) -> anyhow::Result<Vec<PathBuf>> {
    let mut found = BTreeSet::new();
    for arg in args {
        let path = Path::new(arg);
        if path.is_dir() {
            if is_run(path) {
                found.insert(path.to_path_buf());
                continue;
            }
            let children = fs::read_dir(path).with_context(|| format!("listing {arg}"))?;
            let before = found.len();
            for entry in children {
                let p = entry?.path();
                if p.is_dir() && is_run(&p) {
                    found.insert(p);
                }
            }
            if found.len() == before {
                return Err(config_error(format!("{arg} holds no runs")));
            }
            continue;
        }
        let paths = glob::glob(arg).map_err(|e| config_error(format!("pattern {arg}: {e}")))?;
        let before = found.len();
        for p in paths {
            let p = p?;
            if p.is_dir() && is_run(&p) {
                found.insert(p);
            }
        }
        if found.len() == before {
            return Err(config_error(format!("{arg} matches no run directory")));
        }
    }
    Ok(found.into_iter().collect())
}

pub fn load(dir: &Path) -> anyhow::Result<LoadedRun> {
    if !is_run(dir) {
        return Err(config_error(format!("{} is not a run directory", dir.display())));
    }
    Ok(load_run(dir)?)
}

/// Reads `front.json` from a run directory or a path to the file itself.
pub fn load_front(path: &Path) -> anyhow::Result<FrontFile> {
    let file = if path.is_dir() {
        path.join("front.json")
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&file).map_err(|e| config_error(format!("reading {}: {e}", file.display())))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", file.display()))
}
