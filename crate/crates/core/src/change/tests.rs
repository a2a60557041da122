use super::*;
use crate::fixtures::{self, RunningExample};
use crate::ids::Clock;
use crate::model::{ArtifactChanges, Attributes};
use crate::repo::TypeCheck;
use crate::tim::diff_tim;
use crate::versioning::PolicyTable;

fn clock() -> Clock {
    Clock::fixed_rfc3339("2021-05-01T08:00:00Z").unwrap()
}

fn example() -> (Repository, RunningExample) {
    fixtures::running_example(clock()).unwrap()
}

fn touch(repo: &mut Repository, cs: &ChangeSet, ids: &[&ArtifactId]) {
    for id in ids {
        let title = format!("{} edited in {}", id, cs.id);
        repo.update_artifact(cs, id, ArtifactChanges::default().title(title), &PolicyTable::default())
            .unwrap();
    }
}

/// a, b, c created by team x; a+b edited by y; a+c edited by y.
fn three_components() -> (Repository, [ArtifactId; 3]) {
    let mut repo = fixtures::empty_repo(clock()).unwrap();
    let cs = repo.change_set("anna", "x");
    let ids = ["a", "b", "c"].map(|t| repo.create_artifact(&cs, "Component", t, Attributes::new()).unwrap());
    let cs = repo.change_set("ben", "y");
    touch(&mut repo, &cs, &[&ids[0], &ids[1]]);
    let cs = repo.change_set("ben", "y");
    touch(&mut repo, &cs, &[&ids[0], &ids[2]]);
    (repo, ids)
}

#[test]
fn cochange_counts_pairs_per_change_set() {
    let (repo, [a, b, c]) = three_components();
    let stats = mine_cochanges(repo.journal(), None);
    assert_eq!(stats.count(&a, &b), 2);
    assert_eq!(stats.count(&b, &a), 2);
    assert_eq!(stats.count(&a, &c), 2);
    assert_eq!(stats.count(&b, &c), 1);
    assert_eq!(stats.team_touch[&a].len(), 2);
    assert_eq!(stats.change_sets[&c].len(), 2);

    let last = repo.journal().last().unwrap().seq;
    let recent = mine_cochanges(repo.journal(), Some(Window::new(last - 1, last).unwrap()));
    assert_eq!(recent.count(&a, &c), 1);
    assert_eq!(recent.count(&a, &b), 0);
    assert_eq!(Window::new(5, 3), Err(Error::InvalidWindow { since: 5, until: 3 }));
}

#[test]
fn boundary_candidates_need_two_teams() {
    let (mut repo, [a, b, c]) = three_components();
    let stats = mine_cochanges(repo.journal(), None);
    assert_eq!(detect_boundary_candidates(&repo, &stats, 1), Err(Error::InvalidThreshold(1)));
    let found: Vec<ArtifactId> = detect_boundary_candidates(&repo, &stats, 2)
        .unwrap()
        .into_iter()
        .map(|c| c.artifact)
        .collect();
    assert_eq!(found, vec![a.clone(), b.clone(), c.clone()]);
    assert!(detect_boundary_candidates(&repo, &stats, 3).unwrap().is_empty());

    let cs = repo.change_set("mia", "z");
    touch(&mut repo, &cs, &[&b]);
    let cs = repo.change_set("anna", "x");
    repo.set_scope(&cs, &a, Scope::HorizontalBoundary).unwrap();
    let stats = mine_cochanges(repo.journal(), None);
    let found = detect_boundary_candidates(&repo, &stats, 2).unwrap();
    assert_eq!(found[0].artifact, b);
    assert_eq!(found[0].distinct_teams, 3);
    assert!(found.iter().all(|c| c.artifact != a));
}

#[test]
fn impact_follows_mapping_objects() {
    let (mut repo, ex) = example();
    let cs = repo.change_set("rachel", "function");
    touch(&mut repo, &cs, &[&ex.interface]);
    let impact = detect_impact(&repo, &cs.id, &ImpactConfig::default());
    for id in [&ex.mapping, &ex.signal, &ex.safety_goal] {
        assert!(impact.contains(id.as_str()), "{id}");
    }
    let signal_links: Vec<String> = repo.incident_links(&ex.signal).map(|l| l.id.0.clone()).collect();
    assert_eq!(signal_links.len(), 3);
    assert!(signal_links.iter().all(|l| impact.contains(l)));
    assert!(!impact.contains(ex.interface.as_str()));
    assert!(!impact.contains(ex.collision_controller.as_str()));
    assert!(!impact.contains(ex.hazard.as_str()));
}

#[test]
fn impact_of_isolated_artifact_is_empty() {
    let (mut repo, _) = example();
    let cs = repo.change_set("mia", "design");
    repo.create_artifact(&cs, "DesignNote", "lonely", Attributes::new()).unwrap();
    assert!(detect_impact(&repo, &cs.id, &ImpactConfig::default()).is_empty());
    assert!(detect_impact(&repo, "cs-999", &ImpactConfig::default()).is_empty());
}

#[test]
fn impact_includes_frequent_cochanges() {
    let (mut repo, [a, b, c]) = three_components();
    let cs = repo.change_set("ben", "y");
    touch(&mut repo, &cs, &[&b]);
    let impact = detect_impact(&repo, &cs.id, &ImpactConfig::default());
    assert_eq!(impact, BTreeSet::from([a.0.clone()]));
    let strict = ImpactConfig {
        cochange_threshold: 3,
        window: None,
    };
    assert!(detect_impact(&repo, &cs.id, &strict).is_empty());
    let _ = c;
}

#[test]
fn promotion_activates_strict_versioning_and_checks() {
    let (mut repo, ex) = example();
    let mut profile = fixtures::development_profile();
    let cs = repo.change_set("anna", "collision");
    let report = promote_to_boundary(
        &mut repo,
        &cs,
        &ex.collision_controller,
        BoundaryKind::Horizontal,
        &mut profile,
    )
    .unwrap();
    assert_eq!(report.policy_before, VersioningMode::Loose);
    assert_eq!(report.policy_after, VersioningMode::Strict);
    assert_eq!(
        report.activated_checks,
        vec!["version-consistency.stale-boundary-links", "completeness.boundary-owner"]
    );
    assert_eq!(profile.revision, 2);
    assert!(profile.rule("completeness.boundary-owner").unwrap().enabled);
    assert_eq!(report.owner_suggestions[0], "anna");
    assert!(report.required_controls.contains(&Control::StrictVersioning));
    assert!(report.recommendation.contains("collision"));
    assert_eq!(
        repo.live_artifact(&ex.collision_controller).unwrap().scope,
        Scope::HorizontalBoundary
    );

    let again = promote_to_boundary(&mut repo, &cs, &ex.collision_controller, BoundaryKind::Vertical, &mut profile);
    assert_eq!(again.unwrap_err(), Error::AlreadyBoundary(ex.collision_controller.0.clone()));

    let mut p2 = fixtures::development_profile();
    let r2 = promote_to_boundary(&mut repo, &cs, &ex.hazard, BoundaryKind::Vertical, &mut p2).unwrap();
    assert_eq!(r2.owner_suggestions[0], "sam");
}

#[test]
fn external_artifacts_cannot_be_promoted() {
    let (mut repo, _) = example();
    let cs = repo.change_set("cust", "customer");
    let attrs: Attributes = [("external_id".to_string(), "R1".into())].into();
    let ext = repo.create_artifact(&cs, "ExternalRequirement", "r", attrs).unwrap();
    let mut p = fixtures::development_profile();
    let err = promote_to_boundary(&mut repo, &cs, &ext, BoundaryKind::Horizontal, &mut p).unwrap_err();
    assert!(matches!(err, Error::NotPromotable(..)));
    assert_eq!(p.revision, 1);
}

fn evolved(repo: &Repository, edit: impl FnOnce(&mut crate::tim::TimSchema)) -> TimMigrationPlan {
    let old = repo.tim().clone();
    let mut new = old.clone();
    new.schema_version += 1;
    edit(&mut new);
    diff_tim(&old, &new).unwrap()
}

fn set_mediation(link_type: &'static str, m: Mediation) -> impl FnOnce(&mut crate::tim::TimSchema) {
    move |s| {
        s.link_types
            .iter_mut()
            .find(|l| l.name == link_type)
            .unwrap()
            .mediation = m
    }
}

#[test]
fn direct_to_mapped_preserves_related_pairs() {
    let (mut repo, ex) = example();
    let before = repo.related_pairs("produces").unwrap();
    let plan = evolved(&repo, set_mediation("produces", Mediation::Mapped));
    let cs = repo.change_set("rachel", "function");
    let report = apply_migration(&mut repo, &cs, &plan).unwrap();
    assert_eq!(repo.related_pairs("produces").unwrap(), before);
    assert_eq!(report.created.len(), 3);
    assert_eq!(report.deleted.len(), 1);
    assert_eq!(repo.tim().schema_version, 2);
    let mapping = repo
        .artifacts()
        .filter(|a| repo.is_mapping_object(a))
        .filter(|a| a.id != ex.mapping)
        .count();
    assert_eq!(mapping, 1);
}

#[test]
fn mapped_to_direct_preserves_related_pairs() {
    let (mut repo, ex) = example();
    let before = repo.related_pairs("realizes").unwrap();
    let plan = evolved(&repo, set_mediation("realizes", Mediation::Direct));
    let cs = repo.change_set("rachel", "function");
    apply_migration(&mut repo, &cs, &plan).unwrap();
    assert_eq!(repo.related_pairs("realizes").unwrap(), before);
    assert!(!repo.artifact(&ex.mapping).unwrap().is_live());
    let direct: Vec<&TraceLink> = repo.links_of_type("realizes").collect();
    assert_eq!(direct.len(), 1);
    assert_eq!(direct[0].mapping_role, None);
}

#[test]
fn conflicting_migration_leaves_repository_untouched() {
    let (mut repo, ex) = example();
    let cs = repo.change_set("rachel", "function");
    // a second source link makes the mapping object n-ary
    let (mid, _) = {
        let m = repo
            .create_mapped_link(&cs, "realizes", &ex.interface, &ex.signal, TypeCheck::Enforce)
            .unwrap();
        (m.mapping, m.source_link)
    };
    repo.create_link(&cs, "hyperlink", vec![mid], vec![ex.hazard.clone()], TypeCheck::Enforce)
        .unwrap();
    let hash = repo.state_hash();
    let len = repo.journal().len();
    let plan = evolved(&repo, set_mediation("realizes", Mediation::Direct));
    let err = apply_migration(&mut repo, &cs, &plan).unwrap_err();
    assert!(matches!(err, Error::MigrationConflict(_)), "{err:?}");
    assert_eq!(repo.state_hash(), hash);
    assert_eq!(repo.journal().len(), len);
}

#[test]
fn plan_must_match_active_schema() {
    let (mut repo, _) = example();
    let mut plan = evolved(&repo, set_mediation("produces", Mediation::Mapped));
    plan.from_version = 7;
    let cs = repo.change_set("rachel", "function");
    assert!(matches!(apply_migration(&mut repo, &cs, &plan), Err(Error::PlanSchemaMismatch(_))));
    let mut empty = evolved(&repo, |_| {});
    empty.steps.clear();
    let hash = repo.state_hash();
    assert_eq!(apply_migration(&mut repo, &cs, &empty).unwrap().change_count(), 0);
    assert_eq!(repo.state_hash(), hash);
}

#[test]
fn rename_retypes_instances() {
    let (mut repo, ex) = example();
    let cs = repo.change_set("mia", "design");
    let note = repo.create_artifact(&cs, "DesignNote", "n", Attributes::new()).unwrap();
    let l = repo
        .create_link(&cs, "documents", vec![note], vec![ex.signal.clone()], TypeCheck::Enforce)
        .unwrap();
    let plan = evolved(&repo, |s| {
        s.link_types.iter_mut().find(|l| l.name == "documents").unwrap().name = "describes".into()
    });
    let report = apply_migration(&mut repo, &cs, &plan).unwrap();
    assert_eq!(report.retyped, vec![l.0.clone()]);
    assert_eq!(repo.live_link(&l).unwrap().link_type, "describes");
}

#[test]
fn flag_only_removal_keeps_instances() {
    let (mut repo, _) = example();
    let plan = evolved(&repo, |s| s.link_types.retain(|l| l.name != "produces"));
    assert_eq!(plan.steps[0].instance_policy, InstancePolicy::FlagOnly);
    let cs = repo.change_set("rachel", "function");
    apply_migration(&mut repo, &cs, &plan).unwrap();
    assert_eq!(repo.links_of_type("produces").count(), 1);
}

#[test]
fn tuning_bumps_revision_only_on_change() {
    let p = fixtures::development_profile();
    let same = tune_profile(&p, &[Adjustment::Enabled {
        check_id: "validity.links".into(),
        enabled: true,
    }])
    .unwrap();
    assert_eq!(same.revision, 1);
    let tuned = tune_profile(
        &p,
        &[
            Adjustment::Severity {
                check_id: "validity.links".into(),
                severity: "error".into(),
            },
            Adjustment::Policy {
                selector: Some("group=G1".into()),
                mode: "strict".into(),
            },
            Adjustment::CochangeThreshold { value: 4 },
        ],
    )
    .unwrap();
    assert_eq!(tuned.revision, 2);
    assert_eq!(tuned.rule("validity.links").unwrap().severity, Severity::Error);
    assert_eq!(tuned.change_detection.cochange_threshold, 4);

    let unknown = tune_profile(&p, &[Adjustment::Enabled {
        check_id: "nope".into(),
        enabled: false,
    }]);
    assert_eq!(unknown.unwrap_err(), Error::UnknownCheckId("nope".into()));
    let bad = tune_profile(&p, &[Adjustment::Severity {
        check_id: "validity.links".into(),
        severity: "fatal".into(),
    }]);
    assert_eq!(bad.unwrap_err(), Error::InvalidSeverity("fatal".into()));
}
