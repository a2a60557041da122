//! Users, ownership and rigidity of trace links.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{ArtifactId, Timestamp};
use crate::journal::OpKind;
use crate::model::{OwnershipRecord, RigidityGroup, Scope, TraceLink};
use crate::repo::{ChangeSet, Pending, Repository, SYSTEM_ACTOR};
use crate::tim::Abstraction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Developer,
    FunctionExpert,
    SafetyAnalyst,
    MethodsAndTools,
    Architect,
    ExternalCustomer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub id: String,
    pub display_name: String,
    #[serde(default)]
    pub roles: BTreeSet<Role>,
}

impl User {
    pub fn new(id: &str, display_name: &str, roles: &[Role]) -> User {
        User {
            id: id.to_string(),
            display_name: display_name.to_string(),
            roles: roles.iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Control {
    FormalChangeRecord,
    MeetingMinutesReference,
    StrictVersioning,
    ApprovalBeforeRelease,
    QualityGateOnCommit,
    None,
}

impl Control {
    pub const ALL: [Control; 6] = [
        Control::FormalChangeRecord,
        Control::MeetingMinutesReference,
        Control::StrictVersioning,
        Control::ApprovalBeforeRelease,
        Control::QualityGateOnCommit,
        Control::None,
    ];
}

/// Required controls per rigidity group.
///
/// Every group must be present and the sets must nest from G4 up to G1.
/// `none` stands for the empty set and may not be combined with real controls.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<RigidityGroup, BTreeSet<Control>>")]
#[serde(into = "BTreeMap<RigidityGroup, BTreeSet<Control>>")]
pub struct ControlTable {
    groups: BTreeMap<RigidityGroup, BTreeSet<Control>>,
}

impl ControlTable {
    pub fn new(groups: BTreeMap<RigidityGroup, BTreeSet<Control>>) -> Result<ControlTable> {
        for g in RigidityGroup::ALL {
            let set = groups
                .get(&g)
                .ok_or_else(|| Error::ControlsNotNested(format!("{g} is missing")))?;
            if set.is_empty() {
                return Err(Error::ControlsNotNested(format!("{g} has no entry; use `none`")));
            }
            if set.contains(&Control::None) && set.len() > 1 {
                return Err(Error::ControlsNotNested(format!("{g} combines `none` with controls")));
            }
        }
        let table = ControlTable { groups };
        // ALL is ordered G1..G4; each group must include the next, less rigid one
        for w in RigidityGroup::ALL.windows(2) {
            let (outer, inner) = (table.controls(w[0]), table.controls(w[1]));
            if !inner.is_subset(&outer) {
                let extra: Vec<String> = inner
                    .difference(&outer)
                    .map(|c| serde_json::to_value(c).unwrap().as_str().unwrap().to_string())
                    .collect();
                return Err(Error::ControlsNotNested(format!(
                    "{} requires {} which {} lacks",
                    w[1],
                    extra.join(", "),
                    w[0]
                )));
            }
        }
        Ok(table)
    }

    /// Effective controls of `group`, with `none` read as the empty set.
    pub fn controls(&self, group: RigidityGroup) -> BTreeSet<Control> {
        self.groups
            .get(&group)
            .map(|s| s.iter().copied().filter(|c| *c != Control::None).collect())
            .unwrap_or_default()
    }

    pub fn declared(&self) -> &BTreeMap<RigidityGroup, BTreeSet<Control>> {
        &self.groups
    }
}

impl Default for ControlTable {
    fn default() -> Self {
        use Control::*;
        let g1: BTreeSet<Control> = [
            FormalChangeRecord,
            MeetingMinutesReference,
            StrictVersioning,
            ApprovalBeforeRelease,
            QualityGateOnCommit,
        ]
        .into();
        let mut g2 = g1.clone();
        g2.remove(&ApprovalBeforeRelease);
        let mut g3 = g2.clone();
        g3.remove(&MeetingMinutesReference);
        let groups = [
            (RigidityGroup::G1CrossCompany, g1),
            (RigidityGroup::G2CrossAbstraction, g2),
            (RigidityGroup::G3CrossTeam, g3),
            (RigidityGroup::G4IntraTeam, [None].into()),
        ]
        .into();
        ControlTable::new(groups).expect("default control table nests")
    }
}

impl TryFrom<BTreeMap<RigidityGroup, BTreeSet<Control>>> for ControlTable {
    type Error = Error;

    fn try_from(groups: BTreeMap<RigidityGroup, BTreeSet<Control>>) -> Result<Self> {
        ControlTable::new(groups)
    }
}

impl From<ControlTable> for BTreeMap<RigidityGroup, BTreeSet<Control>> {
    fn from(t: ControlTable) -> Self {
        t.groups
    }
}

/// Rigidity group of a set of endpoints.
///
/// G1 if any endpoint is external; G2 if the endpoints span function and
/// design abstraction or one is a vertical boundary object; G3 if teams
/// differ or one is a horizontal boundary object; G4 otherwise.
pub fn classify_endpoints(repo: &Repository, ids: &[ArtifactId]) -> Result<RigidityGroup> {
    let mut abstractions = BTreeSet::new();
    let mut teams = BTreeSet::new();
    let mut scopes = BTreeSet::new();
    for id in ids {
        let a = repo
            .artifact(id)
            .ok_or_else(|| Error::DanglingEndpoint(id.0.clone()))?;
        scopes.insert(a.scope);
        teams.insert(a.team.as_str());
        if let Some(abs) = repo
            .tim()
            .artifact_type(&a.type_name)
            .and_then(|d| d.area.abstraction())
        {
            abstractions.insert(abs);
        }
    }
    Ok(if scopes.contains(&Scope::External) {
        RigidityGroup::G1CrossCompany
    } else if abstractions.contains(&Abstraction::Function) && abstractions.contains(&Abstraction::Design)
        || scopes.contains(&Scope::VerticalBoundary)
    {
        RigidityGroup::G2CrossAbstraction
    } else if teams.len() > 1 || scopes.contains(&Scope::HorizontalBoundary) {
        RigidityGroup::G3CrossTeam
    } else {
        RigidityGroup::G4IntraTeam
    })
}

/// Rigidity group of a link. Role links of a mapping object are classified
/// by the pair the mapping object relates, not by the mapping object itself.
pub fn classify_rigidity(repo: &Repository, link: &TraceLink) -> Result<RigidityGroup> {
    if link.mapping_role.is_some() {
        if let [mapping] = link.sources.as_slice() {
            let p = repo.mapping_partners(mapping);
            let mut ends: Vec<ArtifactId> = p.sources.into_iter().chain(p.targets).collect();
            for t in &link.targets {
                if !ends.contains(t) {
                    ends.push(t.clone());
                }
            }
            return classify_endpoints(repo, &ends);
        }
    }
    let ends: Vec<ArtifactId> = link.endpoints().cloned().collect();
    classify_endpoints(repo, &ends)
}

pub fn record_ownership(
    repo: &mut Repository,
    cs: &ChangeSet,
    artifact: &ArtifactId,
    responsible: &str,
    affected: BTreeSet<String>,
    team: &str,
) -> Result<OwnershipRecord> {
    repo.require_actor(cs)?;
    for u in std::iter::once(responsible).chain(affected.iter().map(String::as_str)) {
        if repo.user(u).is_none() {
            return Err(Error::UnknownUser(u.to_string()));
        }
    }
    let mut a = repo.live_artifact(artifact)?.without_history();
    let record = OwnershipRecord {
        artifact: artifact.clone(),
        responsible: responsible.to_string(),
        affected_users: affected,
        team: team.to_string(),
    };
    a.ownership = Some(record.clone());
    repo.commit(cs, vec![Pending::artifact(OpKind::Update, &a)]);
    Ok(record)
}

/// Boundary objects changed by `change_set`: boundary-scoped subjects plus
/// boundary-scoped endpoints of links touched by it.
fn changed_boundary_objects(repo: &Repository, change_set: &str) -> BTreeSet<ArtifactId> {
    let mut out = BTreeSet::new();
    for e in repo.change_set_entries(change_set) {
        match &e.payload {
            crate::journal::Payload::Artifact(a) => {
                out.insert(a.id.clone());
            }
            crate::journal::Payload::Link(l) => out.extend(l.endpoints().cloned()),
            _ => {}
        }
    }
    out.retain(|id| {
        repo.artifact(id)
            .is_some_and(|a| a.is_live() && a.scope.is_boundary())
    });
    out
}

/// Recomputes affected users of boundary objects changed in `cs` as the
/// responsibles of their neighbors. Records are only updated, never created.
pub fn propagate_org_update(repo: &mut Repository, cs: &ChangeSet) -> Result<Vec<OwnershipRecord>> {
    let mut pending = Vec::new();
    let mut updated = Vec::new();
    for bo in changed_boundary_objects(repo, &cs.id) {
        let a = repo.live_artifact(&bo)?;
        let Some(record) = &a.ownership else { continue };
        let affected: BTreeSet<String> = repo
            .neighbors(&bo)
            .iter()
            .filter_map(|n| repo.artifact(n))
            .filter(|n| n.is_live())
            .filter_map(|n| n.ownership.as_ref().map(|o| o.responsible.clone()))
            .collect();
        if affected == record.affected_users {
            continue;
        }
        let mut next = a.without_history();
        let mut record = record.clone();
        record.affected_users = affected;
        next.ownership = Some(record.clone());
        pending.push(Pending::artifact(OpKind::Update, &next));
        updated.push(record);
    }
    if !pending.is_empty() {
        repo.require_actor(cs)?;
        repo.commit(cs, pending);
    }
    Ok(updated)
}

/// Users ranked by number of journal entries touching `artifact`; ties go
/// to the most recent activity, then to the smaller user id.
pub fn suggest_owner(repo: &Repository, artifact: &ArtifactId) -> Vec<String> {
    let mut stats: BTreeMap<&str, (usize, Option<Timestamp>)> = BTreeMap::new();
    for e in repo.journal() {
        if e.actor == SYSTEM_ACTOR || !e.touches(artifact.as_str()) {
            continue;
        }
        let s = stats.entry(e.actor.as_str()).or_insert((0, None));
        s.0 += 1;
        s.1 = s.1.max(Some(e.timestamp));
    }
    if let Some(a) = repo.artifact(artifact) {
        stats
            .entry(a.created_by.as_str())
            .or_insert((1, Some(a.created_at)));
    }
    let mut ranked: Vec<(&str, (usize, Option<Timestamp>))> = stats.into_iter().collect();
    ranked.sort_by(|(u1, (c1, t1)), (u2, (c2, t2))| {
        c2.cmp(c1).then(t2.cmp(t1)).then(u1.cmp(u2))
    });
    ranked.into_iter().map(|(u, _)| u.to_string()).collect()
}
