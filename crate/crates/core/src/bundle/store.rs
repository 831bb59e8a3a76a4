//! Bundle directory format.
//!
//! ```text
//! bundle/
//!   manifest.json        {"bundle_id": "...", "skills": ["dir-a", "dir-b"]}
//!   dir-a/SKILL.md       ---\nname: ...\ndescription: ...\n---\n<body>
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BundleError, Lineage, Result, Skill, SkillBundle, SkillId};

const MANIFEST: &str = "manifest.json";
const SKILL_FILE: &str = "SKILL.md";

#[derive(Serialize, Deserialize)]
struct Manifest {
    bundle_id: String,
    skills: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lineage: Option<Lineage>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BundleError + '_ {
    move |source| BundleError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn load_bundle(dir: impl AsRef<Path>) -> Result<SkillBundle> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST);
    let raw = fs::read_to_string(&manifest_path).map_err(|e| BundleError::MalformedManifest {
        path: manifest_path.display().to_string(),
        reason: e.to_string(),
    })?;
    let manifest: Manifest = serde_json::from_str(&raw).map_err(|e| BundleError::MalformedManifest {
        path: manifest_path.display().to_string(),
        reason: e.to_string(),
    })?;

    let mut seen = HashSet::new();
    let mut skills = Vec::with_capacity(manifest.skills.len());
    for entry in &manifest.skills {
        let id = SkillId::new(entry.as_str()).map_err(|_| BundleError::MalformedManifest {
            path: manifest_path.display().to_string(),
            reason: format!("`{entry}` is not a valid skill directory name"),
        })?;
        if !seen.insert(id.clone()) {
            return Err(BundleError::DuplicateSkillId(id));
        }
        let file = dir.join(entry).join(SKILL_FILE);
        if !file.is_file() {
            return Err(BundleError::MissingSkillFile(file.display().to_string()));
        }
        let text = fs::read_to_string(&file).map_err(io_err(&file))?;
        let (name, description, body) = parse_skill_md(&text).map_err(|reason| BundleError::MalformedSkillFile {
            path: file.display().to_string(),
            reason,
        })?;
        skills.push(Skill::new(id, name, description, body));
    }

    let mut bundle = SkillBundle::new(manifest.bundle_id, skills)?;
    bundle.lineage = manifest.lineage;
    Ok(bundle)
}

/// Writes `bundle` under `dir`, creating it if needed.
pub fn store_bundle(bundle: &SkillBundle, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for s in bundle.skills() {
        for (field, value) in [("name", s.name()), ("description", s.description())] {
            if value.contains('\n') || value.contains('\r') {
                return Err(BundleError::MalformedSkillFile {
                    path: dir.join(s.id().as_str()).display().to_string(),
                    reason: format!("{field} must be a single line"),
                });
            }
        }
        let skill_dir = dir.join(s.id().as_str());
        fs::create_dir_all(&skill_dir).map_err(io_err(&skill_dir))?;
        let file = skill_dir.join(SKILL_FILE);
        let text = format!(
            "---\nname: {}\ndescription: {}\n---\n{}",
            s.name(),
            s.description(),
            s.body()
        );
        fs::write(&file, text).map_err(io_err(&file))?;
    }
    let manifest = Manifest {
        bundle_id: bundle.id().0.clone(),
        skills: bundle.skills().iter().map(|s| s.id().to_string()).collect(),
        lineage: bundle.lineage().cloned(),
    };
    let path = dir.join(MANIFEST);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(io_err(&path))
}

fn parse_skill_md(text: &str) -> std::result::Result<(String, String, String), String> {
    let rest = text
        .strip_prefix("---\n")
        .or_else(|| text.strip_prefix("---\r\n"))
        .ok_or("missing opening `---` frontmatter line")?;
    let mut name = None;
    let mut description = None;
    let mut offset = 0;
    for raw in rest.split_inclusive('\n') {
        offset += raw.len();
        let line = raw.strip_suffix('\n').unwrap_or(raw);
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line == "---" {
            let name = name.ok_or("frontmatter lacks `name:`")?;
            let description = description.ok_or("frontmatter lacks `description:`")?;
            return Ok((name, description, rest[offset..].to_string()));
        }
        if let Some(v) = line.strip_prefix("name:") {
            name = Some(v.trim().to_string());
        } else if let Some(v) = line.strip_prefix("description:") {
            description = Some(v.trim().to_string());
        }
    }
    Err("unterminated frontmatter".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_frontmatter() {
        let (n, d, b) =
            parse_skill_md("---\nname: triage\ndescription: fix builds\nextra: 1\n---\nbody\n\nmore").unwrap();
        assert_eq!(
            (n.as_str(), d.as_str(), b.as_str()),
            ("triage", "fix builds", "body\n\nmore")
        );
        let (_, _, b) = parse_skill_md("---\r\nname: x\r\ndescription: y\r\n---\r\nz").unwrap();
        assert_eq!(b, "z");
    }

    #[test]
    fn rejects_bad_frontmatter() {
        assert!(parse_skill_md("name: x\n").is_err());
        assert!(parse_skill_md("---\nname: x\ndescription: y\n").is_err());
        assert!(parse_skill_md("---\ndescription: y\n---\nbody").is_err());
    }
}
