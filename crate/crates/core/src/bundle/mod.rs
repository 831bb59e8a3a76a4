//! Skills, skill bundles and the edit operations that transform them.
//!
//! A [`SkillBundle`] is the decision variable of the search: an ordered list of
//! [`Skill`]s. Bundles are immutable; [`apply_edit`] always returns a new bundle
//! whose lineage points back at its parent.

mod store;

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashing::sha256_hex;

pub use store::{load_bundle, store_bundle};

/// Errors raised while editing, loading or storing bundles.
#[derive(Debug, Error)]
pub enum BundleError {
    #[error("unknown skill id `{0}`")]
    UnknownTarget(SkillId),
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("edit would leave the bundle without skills")]
    EmptyResult,
    #[error("duplicate skill id `{0}`")]
    DuplicateSkillId(SkillId),
    #[error("malformed {kind} operation: {reason}")]
    InvalidOp { kind: EditKind, reason: String },
    #[error("invalid skill id `{0}`: must be a non-empty directory-safe name")]
    InvalidSkillId(String),
    #[error("malformed manifest {path}: {reason}")]
    MalformedManifest { path: String, reason: String },
    #[error("missing skill file {0}")]
    MissingSkillFile(String),
    #[error("malformed skill file {path}: {reason}")]
    MalformedSkillFile { path: String, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = BundleError> = std::result::Result<T, E>;

/// Stable identifier of a skill inside a bundle; doubles as its directory name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SkillId(String);

impl SkillId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let valid = !id.is_empty()
            && id != "."
            && id != ".."
            && id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
        if valid {
            Ok(Self(id))
        } else {
            Err(BundleError::InvalidSkillId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SkillId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BundleId(pub String);

impl fmt::Display for BundleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Whitespace-delimited token count.
pub fn count_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Lowercases a token and strips leading/trailing non-alphanumerics, the form
/// used for keyword matching.
pub fn normalize_token(token: &str) -> String {
    token.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SkillRepr", into = "SkillRepr")]
pub struct Skill {
    id: SkillId,
    name: String,
    description: String,
    body: String,
    token_estimate: usize,
}

impl Skill {
    pub fn new(id: SkillId, name: impl Into<String>, description: impl Into<String>, body: impl Into<String>) -> Self {
        let name = name.into();
        let description = description.into();
        let body = body.into();
        let token_estimate = count_tokens(&name) + count_tokens(&description) + count_tokens(&body);
        Self {
            id,
            name,
            description,
            body,
            token_estimate,
        }
    }

    pub fn id(&self) -> &SkillId {
        &self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn token_estimate(&self) -> usize {
        self.token_estimate
    }

    /// Name, description and body joined by newlines.
    pub fn text(&self) -> String {
        format!("{}\n{}\n{}", self.name, self.description, self.body)
    }

    fn content(&self) -> (&str, &str, &str) {
        (&self.name, &self.description, &self.body)
    }

    pub fn to_draft(&self) -> SkillDraft {
        SkillDraft {
            id: Some(self.id.clone()),
            name: self.name.clone(),
            description: self.description.clone(),
            body: self.body.clone(),
        }
    }
}

// Serialized form; the token estimate is recomputed on load.
#[derive(Serialize, Deserialize)]
struct SkillRepr {
    id: SkillId,
    name: String,
    description: String,
    body: String,
}

impl TryFrom<SkillRepr> for Skill {
    type Error = BundleError;

    fn try_from(r: SkillRepr) -> Result<Self> {
        Ok(Skill::new(SkillId::new(r.id.0)?, r.name, r.description, r.body))
    }
}

impl From<Skill> for SkillRepr {
    fn from(s: Skill) -> Self {
        SkillRepr {
            id: s.id,
            name: s.name,
            description: s.description,
            body: s.body,
        }
    }
}

/// Skill content carried by an edit. `id` is optional for new skills; a fresh
/// id is derived from the name when it is absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillDraft {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<SkillId>,
    pub name: String,
    pub description: String,
    pub body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EditKind {
    Prune,
    Substitute,
    Reorder,
    Rewrite,
    Expand,
}

impl EditKind {
    pub const ALL: [EditKind; 5] = [
        EditKind::Prune,
        EditKind::Substitute,
        EditKind::Reorder,
        EditKind::Rewrite,
        EditKind::Expand,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EditKind::Prune => "PRUNE",
            EditKind::Substitute => "SUBSTITUTE",
            EditKind::Reorder => "REORDER",
            EditKind::Rewrite => "REWRITE",
            EditKind::Expand => "EXPAND",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        Self::ALL.into_iter().find(|k| k.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for EditKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditPayload {
    Skills(Vec<SkillDraft>),
    Permutation(Vec<SkillId>),
}

/// One bundle operation.
///
/// Arity rules, checked by [`EditOp::validate`]:
/// * `PRUNE`, `REWRITE`: exactly one existing target; `REWRITE` carries one
///   skill draft whose text replaces the target's (the id is kept).
/// * `SUBSTITUTE`: one existing target and exactly one payload skill, which
///   takes the target's position.
/// * `REORDER`: payload is a permutation of the current skill ids.
/// * `EXPAND`: no targets, at least one new skill, appended at the end.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditOp {
    pub kind: EditKind,
    #[serde(default)]
    pub targets: Vec<SkillId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<EditPayload>,
    #[serde(default)]
    pub description: String,
}

impl EditOp {
    pub fn prune(target: SkillId, description: impl Into<String>) -> Self {
        Self {
            kind: EditKind::Prune,
            targets: vec![target],
            payload: None,
            description: description.into(),
        }
    }

    pub fn rewrite(target: SkillId, draft: SkillDraft, description: impl Into<String>) -> Self {
        Self {
            kind: EditKind::Rewrite,
            targets: vec![target],
            payload: Some(EditPayload::Skills(vec![draft])),
            description: description.into(),
        }
    }

    pub fn substitute(target: SkillId, draft: SkillDraft, description: impl Into<String>) -> Self {
        Self {
            kind: EditKind::Substitute,
            targets: vec![target],
            payload: Some(EditPayload::Skills(vec![draft])),
            description: description.into(),
        }
    }

    pub fn reorder(order: Vec<SkillId>, description: impl Into<String>) -> Self {
        Self {
            kind: EditKind::Reorder,
            targets: Vec::new(),
            payload: Some(EditPayload::Permutation(order)),
            description: description.into(),
        }
    }

    pub fn expand(drafts: Vec<SkillDraft>, description: impl Into<String>) -> Self {
        Self {
            kind: EditKind::Expand,
            targets: Vec::new(),
            payload: Some(EditPayload::Skills(drafts)),
            description: description.into(),
        }
    }

    fn invalid(&self, reason: impl Into<String>) -> BundleError {
        BundleError::InvalidOp {
            kind: self.kind,
            reason: reason.into(),
        }
    }

    fn single_target(&self, bundle: &SkillBundle) -> Result<usize> {
        match self.targets.as_slice() {
            [t] => bundle.position(t).ok_or_else(|| BundleError::UnknownTarget(t.clone())),
            _ => Err(self.invalid(format!("expected exactly one target, got {}", self.targets.len()))),
        }
    }

    fn drafts(&self) -> Result<&[SkillDraft]> {
        match &self.payload {
            Some(EditPayload::Skills(d)) => Ok(d),
            Some(EditPayload::Permutation(_)) => Err(self.invalid("payload must be skill content")),
            None => Err(self.invalid("missing payload")),
        }
    }

    fn single_draft(&self) -> Result<&SkillDraft> {
        match self.drafts()? {
            [d] => Ok(d),
            d => Err(self.invalid(format!("expected exactly one payload skill, got {}", d.len()))),
        }
    }

    /// Checks the arity rules of this operation against `bundle`.
    pub fn validate(&self, bundle: &SkillBundle) -> Result<()> {
        apply_edit(bundle, self).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    pub parent: BundleId,
    pub generation: u32,
    pub op: EditOp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillBundle {
    id: BundleId,
    skills: Vec<Skill>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lineage: Option<Lineage>,
}

impl SkillBundle {
    /// Builds a generation-0 bundle. Skill ids must be unique.
    pub fn new(id: impl Into<String>, skills: Vec<Skill>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &skills {
            if !seen.insert(s.id.clone()) {
                return Err(BundleError::DuplicateSkillId(s.id.clone()));
            }
        }
        Ok(Self {
            id: BundleId(id.into()),
            skills,
            lineage: None,
        })
    }

    pub fn id(&self) -> &BundleId {
        &self.id
    }

    pub fn skills(&self) -> &[Skill] {
        &self.skills
    }

    pub fn lineage(&self) -> Option<&Lineage> {
        self.lineage.as_ref()
    }

    pub fn generation(&self) -> u32 {
        self.lineage.as_ref().map_or(0, |l| l.generation)
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    pub fn skill(&self, id: &SkillId) -> Option<&Skill> {
        self.skills.iter().find(|s| &s.id == id)
    }

    fn position(&self, id: &SkillId) -> Option<usize> {
        self.skills.iter().position(|s| &s.id == id)
    }

    pub fn skill_ids(&self) -> Vec<SkillId> {
        self.skills.iter().map(|s| s.id.clone()).collect()
    }

    pub fn token_count(&self) -> usize {
        self.skills.iter().map(Skill::token_estimate).sum()
    }

    /// All skill text in bundle order.
    pub fn text(&self) -> String {
        self.skills.iter().map(Skill::text).collect::<Vec<_>>().join("\n")
    }

    /// Compares ordered (name, description, body) triples, ignoring ids and lineage.
    pub fn content_eq(&self, other: &SkillBundle) -> bool {
        self.skills.len() == other.skills.len()
            && self
                .skills
                .iter()
                .zip(&other.skills)
                .all(|(a, b)| a.content() == b.content())
    }

    /// Stable digest of the ordered skill content (ids included).
    pub fn content_hash(&self) -> String {
        let mut buf = String::new();
        for s in &self.skills {
            for field in [s.id.as_str(), &s.name, &s.description, &s.body] {
                buf.push_str(&field.len().to_string());
                buf.push(':');
                buf.push_str(field);
            }
        }
        sha256_hex(buf.as_bytes())
    }

    /// Returns a copy with a different id; content and lineage are kept.
    pub fn with_id(&self, id: impl Into<String>) -> Self {
        Self {
            id: BundleId(id.into()),
            ..self.clone()
        }
    }

    /// Markdown rendering used in prompts.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.skills {
            out.push_str(&format!(
                "### [{}] {}\n{}\n\n{}\n\n",
                s.id,
                s.name,
                s.description,
                s.body.trim_end()
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ApplyOptions {
    /// Allow PRUNE to remove the last remaining skill.
    pub allow_empty: bool,
}

/// Applies `op` to `bundle` with default options (empty results rejected).
pub fn apply_edit(bundle: &SkillBundle, op: &EditOp) -> Result<SkillBundle> {
    apply_edit_with(bundle, op, ApplyOptions::default())
}

pub fn apply_edit_with(bundle: &SkillBundle, op: &EditOp, opts: ApplyOptions) -> Result<SkillBundle> {
    let mut skills = bundle.skills.clone();
    match op.kind {
        EditKind::Prune => {
            let idx = op.single_target(bundle)?;
            if op.payload.is_some() {
                return Err(op.invalid("PRUNE takes no payload"));
            }
            if skills.len() == 1 && !opts.allow_empty {
                return Err(BundleError::EmptyResult);
            }
            skills.remove(idx);
        }
        EditKind::Rewrite => {
            let idx = op.single_target(bundle)?;
            let draft = op.single_draft()?;
            if let Some(id) = &draft.id {
                if id != &skills[idx].id {
                    return Err(op.invalid(format!("payload id `{id}` differs from target `{}`", skills[idx].id)));
                }
            }
            let id = skills[idx].id.clone();
            skills[idx] = Skill::new(id, &draft.name, &draft.description, &draft.body);
        }
        EditKind::Substitute => {
            let idx = op.single_target(bundle)?;
            let draft = op.single_draft()?;
            let others: HashSet<SkillId> = skills
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != idx)
                .map(|(_, s)| s.id.clone())
                .collect();
            let id = match &draft.id {
                Some(id) if others.contains(id) => return Err(BundleError::DuplicateSkillId(id.clone())),
                Some(id) => id.clone(),
                None => fresh_skill_id(&draft.name, &others),
            };
            skills[idx] = Skill::new(id, &draft.name, &draft.description, &draft.body);
        }
        EditKind::Reorder => {
            if !op.targets.is_empty() {
                return Err(op.invalid("REORDER takes no targets"));
            }
            let order = match &op.payload {
                Some(EditPayload::Permutation(p)) => p,
                _ => return Err(BundleError::InvalidPermutation("missing permutation payload".into())),
            };
            if order.len() != skills.len() {
                return Err(BundleError::InvalidPermutation(format!(
                    "expected {} ids, got {}",
                    skills.len(),
                    order.len()
                )));
            }
            let mut by_id: HashMap<&SkillId, &Skill> = bundle.skills.iter().map(|s| (&s.id, s)).collect();
            let mut reordered = Vec::with_capacity(order.len());
            for id in order {
                match by_id.remove(id) {
                    Some(s) => reordered.push(s.clone()),
                    None => {
                        return Err(BundleError::InvalidPermutation(format!(
                            "`{id}` is unknown or repeated"
                        )))
                    }
                }
            }
            skills = reordered;
        }
        EditKind::Expand => {
            if !op.targets.is_empty() {
                return Err(op.invalid("EXPAND takes no targets"));
            }
            let drafts = op.drafts()?;
            if drafts.is_empty() {
                return Err(op.invalid("EXPAND needs at least one new skill"));
            }
            let mut taken: HashSet<SkillId> = skills.iter().map(|s| s.id.clone()).collect();
            for d in drafts {
                let id = match &d.id {
                    Some(id) if taken.contains(id) => return Err(BundleError::DuplicateSkillId(id.clone())),
                    Some(id) => id.clone(),
                    None => fresh_skill_id(&d.name, &taken),
                };
                taken.insert(id.clone());
                skills.push(Skill::new(id, &d.name, &d.description, &d.body));
            }
        }
    }

    let op_json = serde_json::to_string(op).expect("edit ops always serialize");
    let id = sha256_hex(format!("{}\n{}", bundle.id, op_json).as_bytes());
    Ok(SkillBundle {
        id: BundleId(format!("b-{}", &id[..12])),
        skills,
        lineage: Some(Lineage {
            parent: bundle.id.clone(),
            generation: bundle.generation() + 1,
            op: op.clone(),
        }),
    })
}

/// Derives a directory-safe id from `name` that is not in `taken`.
pub fn fresh_skill_id(name: &str, taken: &HashSet<SkillId>) -> SkillId {
    let mut slug: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect();
    slug = slug.split('-').filter(|p| !p.is_empty()).collect::<Vec<_>>().join("-");
    if slug.is_empty() {
        slug = "skill".to_string();
    }
    let mut candidate = slug.clone();
    let mut n = 2;
    while taken.contains(candidate.as_str()) {
        candidate = format!("{slug}-{n}");
        n += 1;
    }
    SkillId(candidate)
}

impl std::borrow::Borrow<str> for SkillId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// Describes how to turn `parent` into `child`.
///
/// Ops are emitted in the order EXPAND, PRUNE, REWRITE, REORDER so that no
/// intermediate bundle is empty unless `child` itself is.
pub fn diff_bundles(parent: &SkillBundle, child: &SkillBundle) -> Vec<EditOp> {
    let parent_ids: HashSet<&SkillId> = parent.skills.iter().map(|s| &s.id).collect();
    let child_ids: HashSet<&SkillId> = child.skills.iter().map(|s| &s.id).collect();
    let mut ops = Vec::new();

    let added: Vec<SkillDraft> = child
        .skills
        .iter()
        .filter(|s| !parent_ids.contains(&s.id))
        .map(Skill::to_draft)
        .collect();
    if !added.is_empty() {
        ops.push(EditOp::expand(added, "add skill blocks"));
    }

    for s in parent.skills.iter().filter(|s| !child_ids.contains(&s.id)) {
        ops.push(EditOp::prune(s.id.clone(), format!("remove skill `{}`", s.id)));
    }

    for s in &parent.skills {
        if let Some(c) = child.skill(&s.id) {
            if c.content() != s.content() {
                ops.push(EditOp::rewrite(
                    s.id.clone(),
                    c.to_draft(),
                    format!("rewrite skill `{}`", s.id),
                ));
            }
        }
    }

    let mut order: Vec<&SkillId> = parent
        .skills
        .iter()
        .map(|s| &s.id)
        .filter(|id| child_ids.contains(id))
        .collect();
    order.extend(child.skills.iter().map(|s| &s.id).filter(|id| !parent_ids.contains(id)));
    let target: Vec<&SkillId> = child.skills.iter().map(|s| &s.id).collect();
    if order != target {
        ops.push(EditOp::reorder(child.skill_ids(), "reorder skills"));
    }
    ops
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn skill(id: &str, body: &str) -> Skill {
        Skill::new(
            SkillId::new(id).unwrap(),
            format!("{id} name"),
            format!("{id} desc"),
            body,
        )
    }

    fn abc() -> SkillBundle {
        SkillBundle::new(
            "root",
            vec![skill("a", "alpha"), skill("b", "beta"), skill("c", "gamma")],
        )
        .unwrap()
    }

    fn ids(b: &SkillBundle) -> Vec<&str> {
        b.skills().iter().map(|s| s.id().as_str()).collect()
    }

    fn sid(s: &str) -> SkillId {
        SkillId::new(s).unwrap()
    }

    #[test]
    fn prune_removes_in_place() {
        let b = abc();
        let child = apply_edit(&b, &EditOp::prune(sid("b"), "")).unwrap();
        assert_eq!(ids(&child), ["a", "c"]);
        assert_eq!(ids(&b), ["a", "b", "c"]);
        let lineage = child.lineage().unwrap();
        assert_eq!(lineage.parent, *b.id());
        assert_eq!(lineage.generation, 1);
        assert_ne!(child.id(), b.id());
    }

    #[test]
    fn reorder_applies_permutation() {
        let b = SkillBundle::new("r", vec![skill("a", "x"), skill("b", "y")]).unwrap();
        let child = apply_edit(&b, &EditOp::reorder(vec![sid("b"), sid("a")], "")).unwrap();
        assert_eq!(ids(&child), ["b", "a"]);
    }

    #[test]
    fn substitute_recomputes_token_estimate() {
        let b = SkillBundle::new("r", vec![skill("a", "one two")]).unwrap();
        let draft = SkillDraft {
            id: None,
            name: "A prime".into(),
            description: "replacement skill here".into(),
            body: "  lots of\nnew\t words  in the body ".into(),
        };
        let child = apply_edit(&b, &EditOp::substitute(sid("a"), draft, "")).unwrap();
        let s = &child.skills()[0];
        // independent recount: 2 + 3 + 7
        let expected = [
            "A",
            "prime",
            "replacement",
            "skill",
            "here",
            "lots",
            "of",
            "new",
            "words",
            "in",
            "the",
            "body",
        ]
        .len();
        assert_eq!(s.token_estimate(), expected);
        assert_eq!(s.id().as_str(), "a-prime");
    }

    #[test]
    fn expand_appends_and_rewrite_keeps_id() {
        let b = abc();
        let draft = SkillDraft {
            id: None,
            name: "Extra".into(),
            description: "d".into(),
            body: "e".into(),
        };
        let child = apply_edit(&b, &EditOp::expand(vec![draft], "")).unwrap();
        assert_eq!(ids(&child), ["a", "b", "c", "extra"]);

        let mut d = b.skills()[1].to_draft();
        d.body = "short".into();
        let child = apply_edit(&b, &EditOp::rewrite(sid("b"), d, "")).unwrap();
        assert_eq!(child.skills()[1].body(), "short");
        assert_eq!(ids(&child), ["a", "b", "c"]);
    }

    #[test]
    fn edit_errors() {
        let b = abc();
        assert!(matches!(
            apply_edit(&b, &EditOp::prune(sid("zz"), "")),
            Err(BundleError::UnknownTarget(_))
        ));
        assert!(matches!(
            apply_edit(&b, &EditOp::reorder(vec![sid("a"), sid("a"), sid("b")], "")),
            Err(BundleError::InvalidPermutation(_))
        ));
        assert!(matches!(
            apply_edit(&b, &EditOp::reorder(vec![sid("a")], "")),
            Err(BundleError::InvalidPermutation(_))
        ));
        let single = SkillBundle::new("s", vec![skill("a", "x")]).unwrap();
        assert!(matches!(
            apply_edit(&single, &EditOp::prune(sid("a"), "")),
            Err(BundleError::EmptyResult)
        ));
        let empty = apply_edit_with(
            &single,
            &EditOp::prune(sid("a"), ""),
            ApplyOptions { allow_empty: true },
        )
        .unwrap();
        assert!(empty.is_empty());
        let dup = SkillDraft {
            id: Some(sid("a")),
            name: "n".into(),
            description: "d".into(),
            body: "b".into(),
        };
        assert!(matches!(
            apply_edit(&b, &EditOp::expand(vec![dup], "")),
            Err(BundleError::DuplicateSkillId(_))
        ));
        assert!(matches!(
            apply_edit(&b, &EditOp::expand(vec![], "")),
            Err(BundleError::InvalidOp { .. })
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        assert!(matches!(
            SkillBundle::new("x", vec![skill("a", "1"), skill("a", "2")]),
            Err(BundleError::DuplicateSkillId(_))
        ));
    }

    #[test]
    fn diff_examples() {
        let p = abc();
        let c = apply_edit(&p, &EditOp::prune(sid("b"), "")).unwrap();
        let ops = diff_bundles(&p, &c);
        assert_eq!(ops.len(), 1);
        assert_eq!(ops[0].kind, EditKind::Prune);
        assert_eq!(ops[0].targets, vec![sid("b")]);
        assert!(diff_bundles(&p, &p).is_empty());
    }

    #[test]
    fn generation_chains_back_to_root() {
        let p = abc();
        let c1 = apply_edit(&p, &EditOp::prune(sid("a"), "")).unwrap();
        let c2 = apply_edit(&c1, &EditOp::prune(sid("b"), "")).unwrap();
        assert_eq!(c2.generation(), 2);
        assert_eq!(c2.lineage().unwrap().parent, *c1.id());
        assert_eq!(c1.lineage().unwrap().parent, *p.id());
        assert!(p.lineage().is_none());
    }
}
