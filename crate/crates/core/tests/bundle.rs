mod common;

use std::fs;

use proptest::prelude::*;
use skillmoo_core::bundle::{
    apply_edit, count_tokens, diff_bundles, load_bundle, store_bundle, BundleError, EditOp, Skill, SkillBundle,
    SkillDraft, SkillId,
};

fn skill_strategy(id: String) -> impl Strategy<Value = Skill> {
    (
        "[A-Za-z][A-Za-z0-9 ]{0,12}[a-z]",
        "[A-Za-z][A-Za-z0-9 ,.]{0,30}[a-z.]",
        "([a-z`#*-]{1,8}[ \n]{1,2}){0,30}",
    )
        .prop_map(move |(name, desc, body)| Skill::new(SkillId::new(id.clone()).unwrap(), name, desc, body))
}

fn bundle_strategy() -> impl Strategy<Value = SkillBundle> {
    (1usize..7)
        .prop_flat_map(|n| (0..n).map(|i| skill_strategy(format!("skill-{i}"))).collect::<Vec<_>>())
        .prop_map(|skills| SkillBundle::new("root", skills).unwrap())
}

fn draft() -> impl Strategy<Value = SkillDraft> {
    ("[a-z]{1,8}", "[a-z ]{1,20}[a-z]", "[a-z \n]{0,60}").prop_map(|(name, description, body)| SkillDraft {
        id: None,
        name,
        description,
        body,
    })
}

/// A valid random op for `bundle`, chosen by `pick`.
fn op_for(bundle: &SkillBundle, pick: (u8, usize, Vec<usize>, SkillDraft)) -> EditOp {
    let (kind, target, keys, d) = pick;
    let ids = bundle.skill_ids();
    let target = ids[target % ids.len()].clone();
    match kind % 5 {
        0 if ids.len() > 1 => EditOp::prune(target, "p"),
        1 => EditOp::rewrite(target, d, "r"),
        2 => EditOp::substitute(target, d, "s"),
        3 => {
            let mut order: Vec<(usize, SkillId)> = keys.into_iter().zip(ids).collect();
            order.sort();
            EditOp::reorder(order.into_iter().map(|(_, id)| id).collect(), "o")
        }
        _ => EditOp::expand(vec![d], "e"),
    }
}

fn pick() -> impl Strategy<Value = (u8, usize, Vec<usize>, SkillDraft)> {
    (
        any::<u8>(),
        any::<usize>(),
        prop::collection::vec(any::<usize>(), 7),
        draft(),
    )
}

proptest! {
    #[test]
    fn diff_reproduces_child(bundle in bundle_strategy(), picks in prop::collection::vec(pick(), 1..4)) {
        let mut child = bundle.clone();
        for p in picks {
            let op = op_for(&child, p);
            child = apply_edit(&child, &op).unwrap();
        }
        let mut rebuilt = bundle.clone();
        for op in diff_bundles(&bundle, &child) {
            rebuilt = apply_edit(&rebuilt, &op).unwrap();
        }
        prop_assert!(rebuilt.content_eq(&child));
        prop_assert!(diff_bundles(&child, &child).is_empty());
    }

    #[test]
    fn apply_leaves_parent_untouched(bundle in bundle_strategy(), p in pick()) {
        let before = bundle.clone();
        let op = op_for(&bundle, p);
        let child = apply_edit(&bundle, &op).unwrap();
        prop_assert_eq!(&bundle, &before);
        let lineage = child.lineage().unwrap();
        prop_assert_eq!(&lineage.parent, bundle.id());
        prop_assert_eq!(child.generation(), 1);
        for s in child.skills() {
            prop_assert_eq!(s.token_estimate(), count_tokens(s.name()) + count_tokens(s.description()) + count_tokens(s.body()));
        }
    }

    #[test]
    fn store_load_round_trip(bundle in bundle_strategy()) {
        let tmp = tempfile::tempdir().unwrap();
        store_bundle(&bundle, tmp.path()).unwrap();
        let back = load_bundle(tmp.path()).unwrap();
        prop_assert_eq!(back.len(), bundle.len());
        for (a, b) in back.skills().iter().zip(bundle.skills()) {
            prop_assert_eq!(a.id(), b.id());
            prop_assert_eq!(a.name(), b.name());
            prop_assert_eq!(a.description(), b.description());
            prop_assert_eq!(a.body(), b.body());
        }
    }
}

#[test]
fn fixture_bundle_has_eight_skills() {
    let b = common::seed_bundle();
    assert_eq!(b.len(), 8);
    assert_eq!(b.skills()[0].id().as_str(), "pytest-basics");
    assert!(b.lineage().is_none());
}

#[test]
fn manifest_with_unknown_directory() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("manifest.json"),
        r#"{"bundle_id": "x", "skills": ["ghost"]}"#,
    )
    .unwrap();
    assert!(matches!(load_bundle(tmp.path()), Err(BundleError::MissingSkillFile(_))));
}

#[test]
fn manifest_with_duplicate_entry() {
    let tmp = tempfile::tempdir().unwrap();
    let b = common::seed_bundle();
    store_bundle(&b, tmp.path()).unwrap();
    fs::write(
        tmp.path().join("manifest.json"),
        r#"{"bundle_id": "x", "skills": ["pytest-basics", "pytest-basics"]}"#,
    )
    .unwrap();
    assert!(matches!(load_bundle(tmp.path()), Err(BundleError::DuplicateSkillId(_))));
}

#[test]
fn malformed_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("manifest.json"), "{not json").unwrap();
    assert!(matches!(
        load_bundle(tmp.path()),
        Err(BundleError::MalformedManifest { .. })
    ));
    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_bundle(empty.path()),
        Err(BundleError::MalformedManifest { .. })
    ));
}

#[test]
fn stored_child_keeps_lineage() {
    let b = common::seed_bundle();
    let child = apply_edit(&b, &EditOp::prune(SkillId::new("docs-theming").unwrap(), "drop")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    store_bundle(&child, tmp.path()).unwrap();
    let back = load_bundle(tmp.path()).unwrap();
    assert_eq!(back.lineage(), child.lineage());
    assert_eq!(back.id(), child.id());
    assert_eq!(back.len(), 7);
}
