//! Versioning policies and baselines.
//!
//! A [`PolicyTable`] maps subjects to one of three modes:
//!
//! - `loose`: edits happen in place; a new version only on explicit request.
//! - `mild`: a locally-relevant subject bumps when a boundary object it is
//!   linked to (directly or through one mapping object) carries a major
//!   change in the same change set.
//! - `strict`: every edit bumps.
//!
//! Selectors match on artifact scope and link rigidity group. The most
//! specific match wins (scope+group, then scope, then group, then the
//! table default); equally specific matches resolve to the earliest declared.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{ArtifactId, BaselineId, LinkId, Timestamp};
use crate::journal::{OpKind, Payload};
use crate::model::{
    Artifact, ArtifactChanges, Attributes, LinkChanges, RigidityGroup, Scope, Status, TraceLink,
};
use crate::repo::{ChangeSet, Pending, Repository};
use crate::select::Selector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VersioningMode {
    Loose,
    Mild,
    Strict,
}

impl VersioningMode {
    pub fn as_str(self) -> &'static str {
        match self {
            VersioningMode::Loose => "loose",
            VersioningMode::Mild => "mild",
            VersioningMode::Strict => "strict",
        }
    }

    pub fn parse(s: &str) -> Option<VersioningMode> {
        match s {
            "loose" => Some(VersioningMode::Loose),
            "mild" => Some(VersioningMode::Mild),
            "strict" => Some(VersioningMode::Strict),
            _ => None,
        }
    }
}

/// Empty lists match anything; a selector must constrain at least one side.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicySelector {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scopes: Vec<Scope>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<RigidityGroup>,
}

impl PolicySelector {
    pub fn specificity(&self) -> u8 {
        match (self.scopes.is_empty(), self.groups.is_empty()) {
            (false, false) => 3,
            (false, true) => 2,
            (true, false) => 1,
            (true, true) => 0,
        }
    }

    pub fn matches(&self, subject: &PolicySubject) -> bool {
        (self.scopes.is_empty() || self.scopes.iter().any(|s| subject.scopes.contains(s)))
            && (self.groups.is_empty() || self.groups.iter().any(|g| subject.groups.contains(g)))
    }

    /// Parses `scope=a|b,group=G1|G2`; `boundary` expands to both boundary scopes.
    pub fn parse(text: &str) -> Result<PolicySelector> {
        let bad = || Error::InvalidPolicy(format!("selector `{text}`"));
        let mut sel = PolicySelector::default();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            for item in v.split('|') {
                match k.trim() {
                    "scope" if item == "boundary" => {
                        sel.scopes.push(Scope::HorizontalBoundary);
                        sel.scopes.push(Scope::VerticalBoundary);
                    }
                    "scope" => sel.scopes.push(Scope::parse(item).ok_or_else(bad)?),
                    "group" => sel.groups.push(RigidityGroup::parse(item).ok_or_else(bad)?),
                    _ => return Err(bad()),
                }
            }
        }
        if sel.specificity() == 0 {
            return Err(bad());
        }
        Ok(sel)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersioningPolicy {
    pub mode: VersioningMode,
    pub applies_to: PolicySelector,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyTable {
    pub default: VersioningMode,
    #[serde(default)]
    pub policies: Vec<VersioningPolicy>,
}

impl Default for PolicyTable {
    fn default() -> Self {
        PolicyTable::uniform(VersioningMode::Loose)
    }
}

impl PolicyTable {
    pub fn uniform(mode: VersioningMode) -> PolicyTable {
        PolicyTable {
            default: mode,
            policies: vec![],
        }
    }

    pub fn with(mut self, mode: VersioningMode, applies_to: PolicySelector) -> PolicyTable {
        self.policies.push(VersioningPolicy { mode, applies_to });
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.policies.iter().enumerate() {
            if p.applies_to.specificity() == 0 {
                return Err(Error::InvalidPolicy(format!(
                    "policy #{i} has an empty selector; use the table default instead"
                )));
            }
        }
        Ok(())
    }

    /// Sets the mode of the policy with exactly this selector, adding it if absent.
    pub fn set(&mut self, applies_to: PolicySelector, mode: VersioningMode) {
        match self.policies.iter_mut().find(|p| p.applies_to == applies_to) {
            Some(p) => p.mode = mode,
            None => self.policies.push(VersioningPolicy { mode, applies_to }),
        }
    }
}

/// What a selector is matched against.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PolicySubject {
    pub scopes: BTreeSet<Scope>,
    pub groups: BTreeSet<RigidityGroup>,
}

impl PolicySubject {
    /// An artifact's own scope and the rigidity groups of its live links.
    pub fn of_artifact(repo: &Repository, a: &Artifact) -> PolicySubject {
        PolicySubject {
            scopes: [a.scope].into(),
            groups: repo.incident_links(&a.id).map(|l| l.rigidity_group).collect(),
        }
    }

    /// A link's own group and the scopes of its endpoints.
    pub fn of_link(repo: &Repository, l: &TraceLink) -> PolicySubject {
        PolicySubject {
            scopes: l
                .endpoints()
                .filter_map(|e| repo.artifact(e).map(|a| a.scope))
                .collect(),
            groups: [l.rigidity_group].into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PolicyResolution {
    pub mode: VersioningMode,
    /// Index of the winning policy; `None` for the table default.
    pub index: Option<usize>,
    pub specificity: u8,
    /// Other policies that matched with the same specificity and lost on order.
    pub tied_with: Vec<usize>,
}

pub fn resolve_policy(table: &PolicyTable, subject: &PolicySubject) -> PolicyResolution {
    let mut best: Option<(usize, u8)> = None;
    let mut tied = Vec::new();
    for (i, p) in table.policies.iter().enumerate() {
        if !p.applies_to.matches(subject) {
            continue;
        }
        let s = p.applies_to.specificity();
        match best {
            Some((_, b)) if s < b => {}
            Some((_, b)) if s == b => tied.push(i),
            _ => {
                best = Some((i, s));
                tied.clear();
            }
        }
    }
    match best {
        Some((i, s)) => PolicyResolution {
            mode: table.policies[i].mode,
            index: Some(i),
            specificity: s,
            tied_with: tied,
        },
        None => PolicyResolution {
            mode: table.default,
            index: None,
            specificity: 0,
            tied_with: vec![],
        },
    }
}

pub fn resolve_for_artifact(
    table: &PolicyTable,
    repo: &Repository,
    a: &Artifact,
) -> PolicyResolution {
    resolve_policy(table, &PolicySubject::of_artifact(repo, a))
}

/// The mild-mode rule as a pure function.
pub fn mild_bumps(locally_relevant: bool, linked_to_boundary: bool, major_in_change_set: bool) -> bool {
    locally_relevant && linked_to_boundary && major_in_change_set
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "outcome", content = "version")]
pub enum VersionOutcome {
    UnchangedVersion,
    Bumped(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Change {
    Artifact { id: ArtifactId, changes: ArtifactChanges },
    Link { id: LinkId, changes: LinkChanges },
}

/// Boundary objects reachable from `links` (one mapping-object hop) that
/// carry a major journal entry in `change_set`.
fn major_boundary_neighbor<'a>(
    repo: &Repository,
    change_set: &str,
    candidates: impl Iterator<Item = &'a ArtifactId>,
) -> bool {
    let major: BTreeSet<&str> = repo
        .change_set_entries(change_set)
        .filter(|e| e.major)
        .flat_map(|e| e.subject_ids.iter().map(String::as_str))
        .collect();
    if major.is_empty() {
        return false;
    }
    candidates
        .filter(|id| major.contains(id.as_str()))
        .any(|id| repo.artifact(id).is_some_and(|a| a.scope.is_boundary()))
}

fn apply_attribute_edits(
    attributes: &mut Attributes,
    set: &Attributes,
    remove: &[String],
) {
    for name in remove {
        attributes.remove(name);
    }
    for (k, v) in set {
        attributes.insert(k.clone(), v.clone());
    }
}

fn check_frozen(repo: &Repository, id: &str, version: u32) -> Result<()> {
    match repo.frozen_in(id, version) {
        Some(b) => Err(Error::ImmutableInBaseline {
            id: id.to_string(),
            version,
            baseline: b.0.clone(),
        }),
        None => Ok(()),
    }
}

/// Applies `change` and lets the resolved policy decide whether it becomes a
/// new version.
pub fn apply_change_with_policy(
    repo: &mut Repository,
    change: Change,
    cs: &ChangeSet,
    policies: &PolicyTable,
) -> Result<VersionOutcome> {
    repo.require_actor(cs)?;
    match change {
        Change::Artifact { id, changes } => change_artifact(repo, &id, changes, cs, policies),
        Change::Link { id, changes } => change_link(repo, &id, changes, cs, policies),
    }
}

fn change_artifact(
    repo: &mut Repository,
    id: &ArtifactId,
    changes: ArtifactChanges,
    cs: &ChangeSet,
    policies: &PolicyTable,
) -> Result<VersionOutcome> {
    let current = repo.live_artifact(id)?;
    if current.scope == Scope::External {
        return Err(Error::ReadOnlyImported(id.0.clone()));
    }
    let mode = resolve_for_artifact(policies, repo, current).mode;
    let bump = changes.request_bump
        || match mode {
            VersioningMode::Loose => false,
            VersioningMode::Strict => true,
            VersioningMode::Mild => {
                let neighbors = repo.neighbors(id);
                let linked = neighbors
                    .iter()
                    .any(|n| repo.artifact(n).is_some_and(|a| a.scope.is_boundary()));
                mild_bumps(
                    current.scope == Scope::LocallyRelevant,
                    linked,
                    major_boundary_neighbor(repo, &cs.id, neighbors.iter()),
                )
            }
        };
    let mut next = current.without_history();
    if !bump {
        if current.status == Status::Released {
            return Err(Error::ReleasedImmutable {
                id: id.0.clone(),
                version: current.version,
            });
        }
        check_frozen(repo, id.as_str(), current.version)?;
    }
    apply_attribute_edits(&mut next.attributes, &changes.set_attributes, &changes.remove_attributes);
    if let Some(t) = changes.title {
        next.title = t;
    }
    if let Some(def) = repo.tim().artifact_type(&next.type_name) {
        Repository::check_attributes(def, id.as_str(), &next.attributes)?;
    }
    let outcome = if bump {
        next.version += 1;
        next.status = changes.status.unwrap_or(Status::InWork);
        VersionOutcome::Bumped(next.version)
    } else {
        if let Some(s) = changes.status {
            next.status = s;
        }
        VersionOutcome::UnchangedVersion
    };
    next.changed_by = cs.actor.clone();
    next.changed_at = repo.now();
    let op = if bump { OpKind::VersionBump } else { OpKind::Update };
    repo.commit(cs, vec![Pending::artifact(op, &next)]);
    Ok(outcome)
}

fn change_link(
    repo: &mut Repository,
    id: &LinkId,
    changes: LinkChanges,
    cs: &ChangeSet,
    policies: &PolicyTable,
) -> Result<VersionOutcome> {
    let current = repo.live_link(id)?;
    let mode = resolve_policy(policies, &PolicySubject::of_link(repo, current)).mode;
    let bump = changes.request_bump
        || match mode {
            VersioningMode::Loose => false,
            VersioningMode::Strict => true,
            VersioningMode::Mild => {
                let mut reach: BTreeSet<ArtifactId> = current.endpoints().cloned().collect();
                for e in current.endpoints() {
                    if repo.artifact(e).is_some_and(|a| repo.is_mapping_object(a)) {
                        let p = repo.mapping_partners(e);
                        reach.extend(p.sources);
                        reach.extend(p.targets);
                    }
                }
                major_boundary_neighbor(repo, &cs.id, reach.iter())
            }
        };
    if !bump {
        if current.status == Status::Released {
            return Err(Error::ReleasedImmutable {
                id: id.0.clone(),
                version: current.version,
            });
        }
        check_frozen(repo, id.as_str(), current.version)?;
    }
    let mut next = current.without_history();
    apply_attribute_edits(&mut next.attributes, &changes.set_attributes, &changes.remove_attributes);
    if changes.refresh_endpoints {
        let ends: Vec<ArtifactId> = next.endpoints().cloned().collect();
        next.endpoint_versions = repo.pin_versions(&ends.iter().collect::<Vec<_>>());
    }
    let outcome = if bump {
        next.version += 1;
        next.status = changes.status.unwrap_or(Status::InWork);
        VersionOutcome::Bumped(next.version)
    } else {
        if let Some(s) = changes.status {
            next.status = s;
        }
        VersionOutcome::UnchangedVersion
    };
    next.changed_by = cs.actor.clone();
    next.changed_at = repo.now();
    let op = if bump { OpKind::VersionBump } else { OpKind::Update };
    repo.commit(cs, vec![Pending::link(op, &next)]);
    Ok(outcome)
}

/// Frozen snapshot binding artifacts and links to one version each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Baseline {
    pub id: BaselineId,
    pub name: String,
    pub created_at: Timestamp,
    pub artifact_versions: BTreeMap<ArtifactId, u32>,
    pub link_versions: BTreeMap<LinkId, u32>,
    pub frozen: bool,
}

/// Version each artifact is referenced at by the given links.
pub(crate) fn referenced_versions<'a>(
    links: impl Iterator<Item = (&'a BTreeMap<ArtifactId, u32>, &'a TraceLink)>,
) -> BTreeMap<ArtifactId, BTreeSet<u32>> {
    let mut refs: BTreeMap<ArtifactId, BTreeSet<u32>> = BTreeMap::new();
    for (pins, _) in links {
        for (a, v) in pins {
            refs.entry(a.clone()).or_default().insert(*v);
        }
    }
    refs
}

/// Snapshots the selected artifacts at their head versions, plus every live
/// link whose endpoints all lie inside the selection.
pub fn create_baseline(
    repo: &mut Repository,
    cs: &ChangeSet,
    name: &str,
    selector: &Selector,
) -> Result<Baseline> {
    repo.require_actor(cs)?;
    let selected: BTreeSet<ArtifactId> = selector.select(repo).into_iter().collect();
    if selected.is_empty() {
        return Err(Error::EmptySelection);
    }
    let links: Vec<&TraceLink> = repo
        .links()
        .filter(|l| l.endpoints().all(|e| selected.contains(e)))
        .collect();
    let refs = referenced_versions(links.iter().map(|l| (&l.endpoint_versions, *l)));
    let conflicts: Vec<String> = refs
        .iter()
        .filter(|(_, vs)| vs.len() > 1)
        .map(|(a, _)| a.0.clone())
        .collect();
    if !conflicts.is_empty() {
        return Err(Error::VersionConflict(conflicts));
    }
    let artifact_versions = selected
        .iter()
        .map(|id| {
            (id.clone(), repo.artifact(id).map_or(1, |a| a.version))
        })
        .collect();
    let baseline = Baseline {
        id: repo.next_baseline_id(),
        name: name.to_string(),
        created_at: repo.now(),
        artifact_versions,
        link_versions: links.iter().map(|l| (l.id.clone(), l.version)).collect(),
        frozen: true,
    };
    repo.commit(
        cs,
        vec![Pending {
            op_kind: OpKind::Create,
            subject_ids: vec![baseline.id.0.clone()],
            payload: Payload::Baseline(baseline.clone()),
        }],
    );
    Ok(baseline)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BaselineDelta {
    pub added: Vec<String>,
    pub removed: Vec<String>,
    pub version_changed: Vec<(String, u32, u32)>,
}

impl BaselineDelta {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.version_changed.is_empty()
    }
}

pub fn compare_baselines(b1: &Baseline, b2: &Baseline) -> BaselineDelta {
    fn flatten(b: &Baseline) -> BTreeMap<&str, u32> {
        b.artifact_versions
            .iter()
            .map(|(k, v)| (k.as_str(), *v))
            .chain(b.link_versions.iter().map(|(k, v)| (k.as_str(), *v)))
            .collect()
    }
    let old = flatten(b1);
    let new = flatten(b2);
    let mut delta = BaselineDelta::default();
    for (id, v) in &new {
        match old.get(id) {
            None => delta.added.push(id.to_string()),
            Some(o) if o != v => delta.version_changed.push((id.to_string(), *o, *v)),
            _ => {}
        }
    }
    delta.removed = old
        .keys()
        .filter(|id| !new.contains_key(*id))
        .map(|id| id.to_string())
        .collect();
    delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, RunningExample};
    use crate::ids::Clock;
    use crate::repo::TypeCheck;

    fn example() -> (Repository, RunningExample) {
        fixtures::running_example(Clock::fixed_rfc3339("2020-01-01T00:00:00Z").unwrap()).unwrap()
    }

    fn subject(scope: Scope, groups: &[RigidityGroup]) -> PolicySubject {
        PolicySubject {
            scopes: [scope].into(),
            groups: groups.iter().copied().collect(),
        }
    }

    #[test]
    fn boundary_scope_resolves_strict() {
        let table = PolicyTable::uniform(VersioningMode::Loose).with(
            VersioningMode::Strict,
            PolicySelector::parse("scope=boundary").unwrap(),
        );
        let r = resolve_policy(&table, &subject(Scope::HorizontalBoundary, &[]));
        assert_eq!(r.mode, VersioningMode::Strict);
        let r = resolve_policy(&table, &subject(Scope::LocallyRelevant, &[]));
        assert_eq!((r.mode, r.index), (VersioningMode::Loose, None));
    }

    /// Enumerates every selector over a small lattice and checks the winner
    /// against a direct max-by-specificity-then-index search.
    #[test]
    fn resolution_matches_lattice_oracle() {
        let scopes = [None, Some(Scope::LocallyRelevant), Some(Scope::HorizontalBoundary)];
        let groups = [None, Some(RigidityGroup::G3CrossTeam), Some(RigidityGroup::G4IntraTeam)];
        let mut selectors = vec![];
        for s in scopes {
            for g in groups {
                let sel = PolicySelector {
                    scopes: s.into_iter().collect(),
                    groups: g.into_iter().collect(),
                };
                if sel.specificity() > 0 {
                    selectors.push(sel);
                }
            }
        }
        let modes = [VersioningMode::Loose, VersioningMode::Mild, VersioningMode::Strict];
        // several tables: each selector duplicated with different modes to force ties
        for rot in 0..3 {
            let mut table = PolicyTable::uniform(VersioningMode::Loose);
            for (i, sel) in selectors.iter().enumerate() {
                table = table.with(modes[(i + rot) % 3], sel.clone());
                table = table.with(modes[(i + rot + 1) % 3], sel.clone());
            }
            for s in [Scope::LocallyRelevant, Scope::HorizontalBoundary, Scope::External] {
                for gs in [vec![], vec![RigidityGroup::G3CrossTeam], vec![RigidityGroup::G4IntraTeam, RigidityGroup::G3CrossTeam]] {
                    let subj = subject(s, &gs);
                    let oracle = table
                        .policies
                        .iter()
                        .enumerate()
                        .filter(|(_, p)| {
                            (p.applies_to.scopes.is_empty() || p.applies_to.scopes.contains(&s))
                                && (p.applies_to.groups.is_empty()
                                    || p.applies_to.groups.iter().any(|g| gs.contains(g)))
                        })
                        .max_by(|(i, a), (j, b)| {
                            a.applies_to
                                .specificity()
                                .cmp(&b.applies_to.specificity())
                                .then(j.cmp(i))
                        })
                        .map(|(i, p)| (Some(i), p.mode))
                        .unwrap_or((None, table.default));
                    let r = resolve_policy(&table, &subj);
                    assert_eq!((r.index, r.mode), oracle);
                    if r.index.is_some() {
                        assert!(!r.tied_with.is_empty(), "duplicates must be reported as ties");
                    }
                }
            }
        }
    }

    #[test]
    fn selector_parse() {
        assert!(PolicySelector::parse("").is_err());
        assert!(PolicySelector::parse("scope=nowhere").is_err());
        let s = PolicySelector::parse("scope=locally-relevant,group=G4|g3").unwrap();
        assert_eq!(s.specificity(), 3);
        assert_eq!(s.groups.len(), 2);
    }

    #[test]
    fn mild_truth_table() {
        for bits in 0..8u8 {
            let (l, b, m) = (bits & 1 != 0, bits & 2 != 0, bits & 4 != 0);
            assert_eq!(mild_bumps(l, b, m), bits == 7);
        }
    }

    #[test]
    fn loose_edit_keeps_version_strict_bumps() {
        let (mut repo, ex) = example();
        let cs = repo.change_set("anna", "collision");
        let loose = PolicyTable::uniform(VersioningMode::Loose);
        let out = repo
            .update_artifact(&cs, &ex.collision_controller, ArtifactChanges::default().title("cc v2"), &loose)
            .unwrap();
        assert_eq!(out, VersionOutcome::UnchangedVersion);
        let a = repo.live_artifact(&ex.collision_controller).unwrap();
        assert_eq!((a.version, a.title.as_str()), (1, "cc v2"));

        let strict = PolicyTable::uniform(VersioningMode::Strict);
        let out = repo
            .update_artifact(&cs, &ex.collision_controller, ArtifactChanges::default().title("cc v3"), &strict)
            .unwrap();
        assert_eq!(out, VersionOutcome::Bumped(2));
        let a = repo.live_artifact(&ex.collision_controller).unwrap();
        assert_eq!(a.at_version(1).unwrap().title, "cc v2");
    }

    #[test]
    fn released_artifact_needs_a_new_version() {
        let (mut repo, ex) = example();
        let cs = repo.change_set("anna", "collision");
        let loose = PolicyTable::default();
        repo.update_artifact(&cs, &ex.collision_controller, ArtifactChanges::default().status(Status::Released), &loose)
            .unwrap();
        assert!(matches!(
            repo.update_artifact(&cs, &ex.collision_controller, ArtifactChanges::default().title("x"), &loose),
            Err(Error::ReleasedImmutable { .. })
        ));
        let out = repo
            .update_artifact(&cs, &ex.collision_controller, ArtifactChanges::default().title("x").bump(), &loose)
            .unwrap();
        assert_eq!(out, VersionOutcome::Bumped(2));
        assert_eq!(repo.live_artifact(&ex.collision_controller).unwrap().status, Status::InWork);
    }

    #[test]
    fn baseline_freezes_versions() {
        let (mut repo, ex) = example();
        let cs = repo.change_set("sam", "safety");
        let b = create_baseline(&mut repo, &cs, "r1", &Selector::all()).unwrap();
        assert_eq!(b.artifact_versions.len(), 8);
        assert!(b.frozen);
        let loose = PolicyTable::default();
        let err = repo
            .update_artifact(&cs, &ex.hazard, ArtifactChanges::default().title("x"), &loose)
            .unwrap_err();
        assert_eq!(
            err,
            Error::ImmutableInBaseline {
                id: ex.hazard.0.clone(),
                version: 1,
                baseline: b.id.0.clone()
            }
        );
        let out = repo
            .update_artifact(&cs, &ex.hazard, ArtifactChanges::default().title("x").bump(), &loose)
            .unwrap();
        assert_eq!(out, VersionOutcome::Bumped(2));
        // stored baseline is untouched by later edits
        assert_eq!(repo.baseline(&b.id).unwrap(), &b);
    }

    #[test]
    fn baseline_errors() {
        let (mut repo, ex) = example();
        let cs = repo.change_set("anna", "collision");
        assert_eq!(
            create_baseline(&mut repo, &cs, "none", &Selector::parse("type=DesignNote").unwrap()),
            Err(Error::EmptySelection)
        );
        // second link pins the signal at v2 while the producer link pins v1
        let loose = PolicyTable::default();
        repo.update_artifact(&cs, &ex.signal, ArtifactChanges::default().bump(), &loose)
            .unwrap();
        repo.create_link(&cs, "consumes", vec![ex.collision_controller.clone()], vec![ex.signal.clone()], TypeCheck::Enforce)
            .unwrap();
        assert_eq!(
            create_baseline(&mut repo, &cs, "bad", &Selector::all()),
            Err(Error::VersionConflict(vec![ex.signal.0.clone()]))
        );
    }

    #[test]
    fn compare_scripted_edits() {
        let (mut repo, ex) = example();
        let cs = repo.change_set("anna", "collision");
        let b1 = create_baseline(&mut repo, &cs, "s1", &Selector::all()).unwrap();
        assert!(compare_baselines(&b1, &b1).is_empty());
        let strict = PolicyTable::uniform(VersioningMode::Strict);
        repo.update_artifact(&cs, &ex.brake_controller, ArtifactChanges::default().set("note", "x"), &strict)
            .unwrap();
        let note = repo
            .create_artifact(&cs, "DesignNote", "sprint note", Attributes::new())
            .unwrap();
        let b2 = create_baseline(&mut repo, &cs, "s2", &Selector::all()).unwrap();
        let d = compare_baselines(&b1, &b2);
        assert_eq!(d.added, vec![note.0.clone()]);
        assert!(d.removed.is_empty());
        assert_eq!(d.version_changed, vec![(ex.brake_controller.0.clone(), 1, 2)]);
        let back = compare_baselines(&b2, &b1);
        assert_eq!(back.removed, vec![note.0]);
    }
}
