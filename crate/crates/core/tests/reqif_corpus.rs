use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use tracekit::exchange::{export_reqif, import_reqif, parse_reqif, write_reqif, ReqIfDocument, EXTERNAL_TYPE};
use tracekit::model::ArtifactChanges;
use tracekit::select::Selector;
use tracekit::versioning::PolicyTable;
use tracekit::{fixtures, Clock, Error};

fn clock() -> Clock {
    Clock::fixed_rfc3339("2021-11-02T10:00:00Z").unwrap()
}

fn corpus(dir: &str) -> Vec<PathBuf> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/reqif").join(dir);
    let mut files: Vec<PathBuf> = fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "reqif"))
        .collect();
    files.sort();
    files
}

type Objects = BTreeSet<(String, String, String, String)>;
type Relations = BTreeSet<(String, String, String, String)>;

/// Order-insensitive view of the exchanged fields.
fn fields(d: &ReqIfDocument) -> (String, String, Objects, Relations) {
    (
        d.header.identifier.clone(),
        d.header.creation_time.clone(),
        d.spec_objects
            .iter()
            .map(|o| (o.identifier.clone(), o.last_change.clone(), o.long_name.clone(), o.text_value.clone()))
            .collect(),
        d.spec_relations
            .iter()
            .map(|r| (r.identifier.clone(), r.source_ref.clone(), r.target_ref.clone(), r.type_name.clone()))
            .collect(),
    )
}

#[test]
fn corpus_has_twenty_documents() {
    assert_eq!(corpus("valid").len(), 20);
}

#[test]
fn valid_documents_round_trip_through_a_fresh_repository() {
    for path in corpus("valid") {
        let text = fs::read_to_string(&path).unwrap();
        let (doc, _) = parse_reqif(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(parse_reqif(&write_reqif(&doc)).unwrap().0, doc, "{}", path.display());

        let mut repo = fixtures::empty_repo(clock()).unwrap();
        let cs = repo.change_set("cust", "customer");
        let rec = import_reqif(&mut repo, &cs, &doc).unwrap();
        assert_eq!(rec.created.len(), doc.spec_objects.len());

        let sel = Selector::parse(&format!("type={EXTERNAL_TYPE}")).unwrap();
        let out = export_reqif(&repo, &sel, &doc.header.identifier, &doc.header.creation_time).unwrap();
        assert_eq!(fields(&out), fields(&doc), "{}", path.display());

        // an identical re-import is a no-op on content
        let cs = repo.change_set("cust", "customer");
        let again = import_reqif(&mut repo, &cs, &doc).unwrap();
        assert!(again.created.is_empty() && again.new_versions.is_empty() && again.updated.is_empty());
    }
}

#[test]
fn imported_artifacts_are_read_only() {
    let path = &corpus("valid")[0];
    let (doc, _) = parse_reqif(&fs::read_to_string(path).unwrap()).unwrap();
    let mut repo = fixtures::empty_repo(clock()).unwrap();
    let cs = repo.change_set("cust", "customer");
    let rec = import_reqif(&mut repo, &cs, &doc).unwrap();
    let cs = repo.change_set("rachel", "function");
    for id in &rec.created {
        let before = repo.state_hash();
        let err = repo
            .update_artifact(&cs, id, ArtifactChanges::default().title("edited"), &PolicyTable::default())
            .unwrap_err();
        assert!(matches!(err, Error::ReadOnlyImported(_)), "{err:?}");
        assert!(matches!(repo.delete_artifact(&cs, id), Err(Error::ReadOnlyImported(_))));
        assert_eq!(repo.state_hash(), before);
    }
}

#[test]
fn invalid_documents_are_rejected() {
    let files = corpus("invalid");
    assert!(files.len() >= 10);
    for path in files {
        let text = fs::read_to_string(&path).unwrap();
        match parse_reqif(&text) {
            Err(Error::ParseError { line, .. }) => assert!(line >= 1, "{}", path.display()),
            other => panic!("{} parsed: {other:?}", path.display()),
        }
    }
}
