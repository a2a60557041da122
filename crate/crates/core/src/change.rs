//! Change impact, co-change mining, boundary-object promotion, schema
//! migration with instance evolution, and profile tuning.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::ids::{ArtifactId, LinkId};
use crate::journal::{ChangeJournalEntry, OpKind, Payload};
use crate::model::{MappingRole, RigidityGroup, Scope, TraceLink};
use crate::org::{self, Control};
use crate::quality::{QualityProfile, Severity};
use crate::repo::{ChangeSet, Pending, Repository};
use crate::tim::{apply_schema_ops, validate_tim, InstancePolicy, Mediation, MigrationOp, TimMigrationPlan};
use crate::versioning::{resolve_for_artifact, PolicySelector, VersioningMode};

/// Inclusive range of journal sequence numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub since: u64,
    pub until: u64,
}

impl Window {
    pub fn new(since: u64, until: u64) -> Result<Window> {
        if since > until {
            return Err(Error::InvalidWindow { since, until });
        }
        Ok(Window { since, until })
    }

    pub fn contains(&self, seq: u64) -> bool {
        (self.since..=self.until).contains(&seq)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoChangeStats {
    pub window: Option<Window>,
    /// Keyed by ordered pair `(a, b)` with `a < b`.
    pub pair_counts: BTreeMap<(ArtifactId, ArtifactId), usize>,
    pub team_touch: BTreeMap<ArtifactId, BTreeSet<String>>,
    pub change_sets: BTreeMap<ArtifactId, BTreeSet<String>>,
}

impl CoChangeStats {
    pub fn count(&self, a: &ArtifactId, b: &ArtifactId) -> usize {
        let key = if a < b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
        self.pair_counts.get(&key).copied().unwrap_or(0)
    }
}

/// Counts, for every pair of artifacts, the change sets that touched both.
/// Only artifact changes count; link and bookkeeping entries are ignored.
pub fn mine_cochanges(journal: &[ChangeJournalEntry], window: Option<Window>) -> CoChangeStats {
    let mut by_cs: BTreeMap<&str, BTreeSet<&ArtifactId>> = BTreeMap::new();
    let mut stats = CoChangeStats {
        window,
        ..Default::default()
    };
    for e in journal {
        if window.is_some_and(|w| !w.contains(e.seq)) {
            continue;
        }
        let Payload::Artifact(a) = &e.payload else { continue };
        by_cs.entry(&e.change_set_id).or_default().insert(&a.id);
        stats.team_touch.entry(a.id.clone()).or_default().insert(e.team.clone());
        stats
            .change_sets
            .entry(a.id.clone())
            .or_default()
            .insert(e.change_set_id.clone());
    }
    for ids in by_cs.values() {
        let ids: Vec<&&ArtifactId> = ids.iter().collect();
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                *stats
                    .pair_counts
                    .entry(((**a).clone(), (**b).clone()))
                    .or_default() += 1;
            }
        }
    }
    stats
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundaryCandidate {
    pub artifact: ArtifactId,
    pub distinct_teams: usize,
    pub change_sets: Vec<String>,
}

/// Locally-relevant artifacts touched by at least `threshold_teams` teams,
/// most widely shared first.
pub fn detect_boundary_candidates(
    repo: &Repository,
    stats: &CoChangeStats,
    threshold_teams: usize,
) -> Result<Vec<BoundaryCandidate>> {
    if threshold_teams < 2 {
        return Err(Error::InvalidThreshold(threshold_teams));
    }
    let mut out: Vec<BoundaryCandidate> = stats
        .team_touch
        .iter()
        .filter(|(_, teams)| teams.len() >= threshold_teams)
        .filter(|(id, _)| {
            repo.artifact(id)
                .is_some_and(|a| a.is_live() && a.scope == Scope::LocallyRelevant)
        })
        .map(|(id, teams)| BoundaryCandidate {
            artifact: id.clone(),
            distinct_teams: teams.len(),
            change_sets: stats
                .change_sets
                .get(id)
                .map(|s| s.iter().cloned().collect())
                .unwrap_or_default(),
        })
        .collect();
    out.sort_by(|a, b| {
        b.distinct_teams
            .cmp(&a.distinct_teams)
            .then_with(|| a.artifact.cmp(&b.artifact))
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImpactConfig {
    pub cochange_threshold: usize,
    pub window: Option<Window>,
}

impl Default for ImpactConfig {
    fn default() -> Self {
        ImpactConfig {
            cochange_threshold: 2,
            window: None,
        }
    }
}

/// Elements possibly affected by the change set `change_set`, excluding the
/// changed artifacts themselves.
///
/// Graph part: incident links of changed artifacts and their opposite
/// endpoints; through a mapping object also its other links, the artifacts
/// it maps and those artifacts' links. History part: artifacts co-changed
/// with a changed artifact at least `cochange_threshold` times.
pub fn detect_impact(repo: &Repository, change_set: &str, config: &ImpactConfig) -> BTreeSet<String> {
    let mut changed: BTreeSet<ArtifactId> = BTreeSet::new();
    let mut impacted: BTreeSet<String> = BTreeSet::new();
    for e in repo.change_set_entries(change_set) {
        match &e.payload {
            Payload::Artifact(a) => {
                changed.insert(a.id.clone());
            }
            Payload::Link(l) => {
                impacted.extend(l.endpoints().map(|id| id.0.clone()));
            }
            _ => {}
        }
    }
    for a in &changed {
        for l in repo.incident_links(a) {
            impacted.insert(l.id.0.clone());
            for other in l.endpoints().filter(|e| *e != a) {
                impacted.insert(other.0.clone());
                let is_mapping = repo
                    .artifact(other)
                    .is_some_and(|m| m.is_live() && repo.is_mapping_object(m));
                if !is_mapping {
                    continue;
                }
                for ml in repo.incident_links(other) {
                    impacted.insert(ml.id.0.clone());
                    for partner in ml.endpoints().filter(|p| *p != other && *p != a) {
                        impacted.insert(partner.0.clone());
                        impacted.extend(repo.incident_links(partner).map(|pl| pl.id.0.clone()));
                    }
                }
            }
        }
    }
    if !changed.is_empty() {
        let stats = mine_cochanges(repo.journal(), config.window);
        for ((a, b), &n) in &stats.pair_counts {
            if n < config.cochange_threshold {
                continue;
            }
            if changed.contains(a) {
                impacted.insert(b.0.clone());
            }
            if changed.contains(b) {
                impacted.insert(a.0.clone());
            }
        }
    }
    for a in &changed {
        impacted.remove(a.as_str());
    }
    impacted.retain(|id| {
        let a = repo.artifact(&ArtifactId::new(id.as_str()));
        let l = repo.link(&LinkId::new(id.as_str()));
        a.is_some_and(|a| a.is_live()) || l.is_some_and(|l| l.is_live())
    });
    impacted
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    Horizontal,
    Vertical,
}

impl BoundaryKind {
    pub fn scope(self) -> Scope {
        match self {
            BoundaryKind::Horizontal => Scope::HorizontalBoundary,
            BoundaryKind::Vertical => Scope::VerticalBoundary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromotionReport {
    pub artifact: ArtifactId,
    pub scope: Scope,
    pub policy_before: VersioningMode,
    pub policy_after: VersioningMode,
    pub activated_checks: Vec<String>,
    pub reclassified_links: Vec<LinkId>,
    pub required_controls: BTreeSet<Control>,
    pub owner_suggestions: Vec<String>,
    pub recommendation: String,
    pub profile_revision: u32,
}

/// Turns a locally-relevant artifact into a boundary object and enables the
/// checks listed in the profile's promotion parameters.
pub fn promote_to_boundary(
    repo: &mut Repository,
    cs: &ChangeSet,
    artifact: &ArtifactId,
    kind: BoundaryKind,
    profile: &mut QualityProfile,
) -> Result<PromotionReport> {
    let a = repo.live_artifact(artifact)?;
    if a.scope.is_boundary() {
        return Err(Error::AlreadyBoundary(artifact.0.clone()));
    }
    if a.scope != Scope::LocallyRelevant {
        return Err(Error::NotPromotable(artifact.0.clone(), a.scope.to_string()));
    }
    let title = a.title.clone();
    let policy_before = resolve_for_artifact(&profile.versioning, repo, a).mode;
    // ranked on history before the promotion entry itself
    let owner_suggestions = org::suggest_owner(repo, artifact);
    let reclassified_links = repo.set_scope(cs, artifact, kind.scope())?;
    let a = repo.live_artifact(artifact)?;
    let policy_after = resolve_for_artifact(&profile.versioning, repo, a).mode;

    let mut activated_checks = Vec::new();
    for id in profile.promotion.activate.clone() {
        let rule = profile
            .rule_mut(&id)
            .ok_or_else(|| Error::UnknownCheckId(id.clone()))?;
        if !rule.enabled {
            rule.enabled = true;
            activated_checks.push(id);
        }
    }
    if !activated_checks.is_empty() {
        profile.revision += 1;
    }

    let groups: BTreeSet<RigidityGroup> = repo.incident_links(artifact).map(|l| l.rigidity_group).collect();
    let mut required_controls: BTreeSet<Control> = groups
        .iter()
        .flat_map(|g| profile.controls.controls(*g))
        .collect();
    if policy_after == VersioningMode::Strict {
        required_controls.insert(Control::StrictVersioning);
    }
    let teams: BTreeSet<&str> = repo
        .journal()
        .iter()
        .filter(|e| e.touches(artifact.as_str()) && e.is_artifact_change())
        .map(|e| e.team.as_str())
        .collect();
    let recommendation = format!(
        "Consider a community of practice for {artifact} ({title}) with teams {}{}",
        teams.into_iter().collect::<Vec<_>>().join(", "),
        owner_suggestions
            .first()
            .map(|o| format!("; suggested owner {o}"))
            .unwrap_or_default()
    );
    Ok(PromotionReport {
        artifact: artifact.clone(),
        scope: kind.scope(),
        policy_before,
        policy_after,
        activated_checks,
        reclassified_links,
        required_controls,
        owner_suggestions,
        recommendation,
        profile_revision: profile.revision,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MigrationReport {
    pub from_version: u64,
    pub to_version: u64,
    pub ops: Vec<String>,
    pub created: Vec<String>,
    pub deleted: Vec<String>,
    pub retyped: Vec<String>,
    pub reclassified: Vec<String>,
}

impl MigrationReport {
    pub fn change_count(&self) -> usize {
        self.created.len() + self.deleted.len() + self.retyped.len() + self.reclassified.len()
    }
}

/// Replaces the active schema and evolves instance data per step.
///
/// All work happens on a scratch copy that replaces `repo` only when every
/// step succeeded, so a conflict leaves the repository untouched.
pub fn apply_migration(
    repo: &mut Repository,
    cs: &ChangeSet,
    plan: &TimMigrationPlan,
) -> Result<MigrationReport> {
    let tim = repo.tim();
    if plan.schema_id != tim.schema_id || plan.from_version != tim.schema_version {
        return Err(Error::PlanSchemaMismatch(format!(
            "plan targets {} v{}, active schema is {} v{}",
            plan.schema_id, plan.from_version, tim.schema_id, tim.schema_version
        )));
    }
    let mut report = MigrationReport {
        from_version: plan.from_version,
        to_version: plan.from_version,
        ..Default::default()
    };
    if plan.is_empty() {
        return Ok(report);
    }
    if plan.to_version <= plan.from_version {
        return Err(Error::PlanSchemaMismatch(format!(
            "to_version {} must exceed {}",
            plan.to_version, plan.from_version
        )));
    }
    repo.require_actor(cs)?;
    let schema = apply_schema_ops(tim, plan)?;
    let errors = validate_tim(&schema);
    if !errors.is_empty() {
        let msgs: Vec<String> = errors.iter().map(ToString::to_string).collect();
        return Err(Error::PlanSchemaMismatch(msgs.join("; ")));
    }
    report.to_version = schema.schema_version;

    let mut scratch = repo.clone();
    scratch.commit(
        cs,
        vec![Pending {
            op_kind: OpKind::Update,
            subject_ids: vec![schema.schema_id.clone()],
            payload: Payload::Tim(schema),
        }],
    );
    for step in &plan.steps {
        report.ops.push(step.op.kind().to_string());
        evolve(&mut scratch, cs, &step.op, step.instance_policy, &mut report)?;
    }
    // areas or endpoints may have moved; bring every group up to date
    let mut pending = Vec::new();
    for l in scratch.links() {
        let g = org::classify_rigidity(&scratch, l)?;
        if g != l.rigidity_group {
            let mut l = l.without_history();
            l.rigidity_group = g;
            report.reclassified.push(l.id.0.clone());
            pending.push(Pending::link(OpKind::Update, &l));
        }
    }
    scratch.commit(cs, pending);
    *repo = scratch;
    Ok(report)
}

fn live_links_of_type(repo: &Repository, link_type: &str) -> Vec<TraceLink> {
    repo.links_of_type(link_type).map(|l| l.without_history()).collect()
}

fn evolve(
    repo: &mut Repository,
    cs: &ChangeSet,
    op: &MigrationOp,
    policy: InstancePolicy,
    report: &mut MigrationReport,
) -> Result<()> {
    match op {
        MigrationOp::RenameLinkType { from, to } => {
            // a rename never loses data, so it always applies
            let mut pending = Vec::new();
            for mut l in live_links_of_type(repo, from) {
                l.link_type = to.clone();
                report.retyped.push(l.id.0.clone());
                pending.push(Pending::link(OpKind::Retype, &l));
            }
            repo.commit(cs, pending);
        }
        _ if policy == InstancePolicy::FlagOnly => {}
        MigrationOp::ChangeMediation { link_type, from: Mediation::Direct, to: Mediation::Mapped } => {
            direct_to_mapped(repo, cs, link_type, report)?;
        }
        MigrationOp::ChangeMediation { link_type, from: Mediation::Mapped, to: Mediation::Direct } => {
            mapped_to_direct(repo, cs, link_type, report)?;
        }
        MigrationOp::RemoveLinkType { name } => {
            for l in live_links_of_type(repo, name) {
                repo.delete_link(cs, &l.id)?;
                report.deleted.push(l.id.0.clone());
            }
        }
        MigrationOp::RemoveArtifactType { name } => {
            let ids: Vec<ArtifactId> = repo
                .artifacts()
                .filter(|a| &a.type_name == name)
                .map(|a| a.id.clone())
                .collect();
            for id in ids {
                tombstone_artifact(repo, cs, &id, report);
            }
        }
        _ => {}
    }
    Ok(())
}

/// Tombstones an artifact and its live links regardless of scope.
fn tombstone_artifact(repo: &mut Repository, cs: &ChangeSet, id: &ArtifactId, report: &mut MigrationReport) {
    let now = repo.now();
    let mut pending = Vec::new();
    for l in repo.incident_links(id) {
        let mut l = l.without_history();
        l.deleted = true;
        l.changed_by = cs.actor.clone();
        l.changed_at = now;
        report.deleted.push(l.id.0.clone());
        pending.push(Pending::link(OpKind::Delete, &l));
    }
    if let Some(a) = repo.artifact(id) {
        let mut a = a.without_history();
        a.deleted = true;
        a.changed_by = cs.actor.clone();
        a.changed_at = now;
        report.deleted.push(a.id.0.clone());
        pending.push(Pending::artifact(OpKind::Delete, &a));
    }
    repo.commit(cs, pending);
}

fn direct_to_mapped(
    repo: &mut Repository,
    cs: &ChangeSet,
    link_type: &str,
    report: &mut MigrationReport,
) -> Result<()> {
    let mapping_def = repo
        .tim()
        .mapping_type()
        .cloned()
        .ok_or(Error::NoMappingType)?;
    for l in live_links_of_type(repo, link_type) {
        if l.mapping_role.is_some() {
            continue;
        }
        let mut alloc = repo.allocator();
        let mut pending = Vec::new();
        for s in &l.sources {
            for t in &l.targets {
                let triple =
                    repo.mapped_triple(cs, &mut alloc, link_type, &mapping_def, s, t, l.attributes.clone())?;
                report
                    .created
                    .extend(triple.iter().map(|p| p.subject_ids[0].clone()));
                pending.extend(triple);
            }
        }
        let mut old = l.clone();
        old.deleted = true;
        old.changed_by = cs.actor.clone();
        old.changed_at = repo.now();
        report.deleted.push(old.id.0.clone());
        pending.push(Pending::link(OpKind::Delete, &old));
        repo.commit(cs, pending);
    }
    Ok(())
}

fn mapped_to_direct(
    repo: &mut Repository,
    cs: &ChangeSet,
    link_type: &str,
    report: &mut MigrationReport,
) -> Result<()> {
    let mut by_mapping: BTreeMap<ArtifactId, Vec<TraceLink>> = BTreeMap::new();
    for l in live_links_of_type(repo, link_type) {
        if l.mapping_role.is_none() {
            continue;
        }
        let [m] = l.sources.as_slice() else {
            return Err(Error::MigrationConflict(format!("{} has {} mapping sources", l.id, l.sources.len())));
        };
        by_mapping.entry(m.clone()).or_default().push(l);
    }
    for (m, links) in by_mapping {
        let role = |r: MappingRole| links.iter().filter(|l| l.mapping_role == Some(r)).collect::<Vec<_>>();
        let (srcs, tgts) = (role(MappingRole::Source), role(MappingRole::Target));
        let others = repo.incident_links(&m).count() - links.len();
        let (&[s], &[t]) = (srcs.as_slice(), tgts.as_slice()) else {
            return Err(Error::MigrationConflict(format!(
                "mapping object {m} has {} source and {} target links",
                srcs.len(),
                tgts.len()
            )));
        };
        if s.targets.len() != 1 || t.targets.len() != 1 || others > 0 {
            return Err(Error::MigrationConflict(format!(
                "mapping object {m} relates more than two artifacts"
            )));
        }
        let (a, b) = (s.targets[0].clone(), t.targets[0].clone());
        let now = repo.now();
        let mut alloc = repo.allocator();
        let id = alloc.link();
        let direct = TraceLink {
            id: id.clone(),
            link_type: link_type.to_string(),
            endpoint_versions: repo.pin_versions(&[&a, &b]),
            sources: vec![a.clone()],
            targets: vec![b.clone()],
            attributes: s.attributes.clone(),
            status: s.status,
            version: 1,
            rigidity_group: org::classify_endpoints(repo, &[a, b])?,
            mapping_role: None,
            created_by: cs.actor.clone(),
            created_at: now,
            changed_by: cs.actor.clone(),
            changed_at: now,
            deleted: false,
            history: vec![],
        };
        report.created.push(id.0.clone());
        let mut pending = vec![Pending::link(OpKind::Create, &direct)];
        for old in [s, t] {
            let mut old = old.clone();
            old.deleted = true;
            old.changed_by = cs.actor.clone();
            old.changed_at = now;
            report.deleted.push(old.id.0.clone());
            pending.push(Pending::link(OpKind::Delete, &old));
        }
        if let Some(mo) = repo.artifact(&m) {
            let mut mo = mo.without_history();
            mo.deleted = true;
            mo.changed_by = cs.actor.clone();
            mo.changed_at = now;
            report.deleted.push(mo.id.0.clone());
            pending.push(Pending::artifact(OpKind::Delete, &mo));
        }
        repo.commit(cs, pending);
    }
    Ok(())
}

/// One requested profile change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "set", rename_all = "kebab-case")]
pub enum Adjustment {
    Severity { check_id: String, severity: String },
    Enabled { check_id: String, enabled: bool },
    Param { check_id: String, key: String, value: Value },
    /// `selector` of `None` changes the table default.
    Policy { selector: Option<String>, mode: String },
    CochangeThreshold { value: usize },
    BoundaryTeamThreshold { value: usize },
}

/// Applies `adjustments` to a copy of `profile`. The revision advances only
/// when the result differs from the input.
pub fn tune_profile(profile: &QualityProfile, adjustments: &[Adjustment]) -> Result<QualityProfile> {
    let mut next = profile.clone();
    for adj in adjustments {
        match adj {
            Adjustment::Severity { check_id, severity } => {
                let severity = Severity::parse(severity)?;
                rule(&mut next, check_id)?.severity = severity;
            }
            Adjustment::Enabled { check_id, enabled } => rule(&mut next, check_id)?.enabled = *enabled,
            Adjustment::Param { check_id, key, value } => {
                rule(&mut next, check_id)?.params.insert(key.clone(), value.clone());
            }
            Adjustment::Policy { selector, mode } => {
                let mode = VersioningMode::parse(mode)
                    .ok_or_else(|| Error::InvalidPolicy(format!("mode `{mode}`")))?;
                match selector {
                    None => next.versioning.default = mode,
                    Some(s) => next.versioning.set(PolicySelector::parse(s)?, mode),
                }
            }
            Adjustment::CochangeThreshold { value } => next.change_detection.cochange_threshold = *value,
            Adjustment::BoundaryTeamThreshold { value } => {
                next.change_detection.boundary_team_threshold = *value
            }
        }
    }
    next.validate()?;
    if next != *profile {
        next.revision = profile.revision + 1;
    }
    Ok(next)
}

fn rule<'a>(p: &'a mut QualityProfile, check_id: &str) -> Result<&'a mut crate::quality::RuleConfig> {
    p.rule_mut(check_id)
        .ok_or_else(|| Error::UnknownCheckId(check_id.to_string()))
}

#[cfg(test)]
mod tests;
