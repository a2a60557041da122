//! Artifact and trace-link store.
//!
//! All mutations funnel through [`Repository::commit`], which appends one
//! journal entry per touched element and applies its payload. Replay uses
//! the same `apply` path, so a repository rebuilt from its journal is
//! byte-identical to the live one (see [`Repository::state_hash`]).

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ids::{ArtifactId, BaselineId, Clock, LinkId, Timestamp};
use crate::journal::{self, ChangeJournalEntry, JournalFilter, OpKind, Payload};
use crate::model::{
    Artifact, ArtifactChanges, Attributes, LinkChanges, MappingRole, Scope, Status, TraceLink,
};
use crate::org::{self, User};
use crate::tim::{validate_tim, Area, ArtifactTypeDef, Mediation, TimSchema};
use crate::versioning::{self, Baseline, Change, PolicyTable, VersionOutcome};

pub const SYSTEM_ACTOR: &str = "system";

/// The committed, hashable part of a repository.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepoState {
    pub tim: TimSchema,
    pub users: BTreeMap<String, User>,
    pub artifacts: BTreeMap<ArtifactId, Artifact>,
    pub links: BTreeMap<LinkId, TraceLink>,
    pub baselines: BTreeMap<BaselineId, Baseline>,
}

impl RepoState {
    fn empty() -> Self {
        RepoState {
            tim: TimSchema {
                schema_id: String::new(),
                schema_version: 0,
                artifact_types: vec![],
                link_types: vec![],
            },
            users: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            links: BTreeMap::new(),
            baselines: BTreeMap::new(),
        }
    }
}

/// A unit of work: every journal entry written under it shares the id,
/// actor, team and major flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeSet {
    pub id: String,
    pub actor: String,
    pub team: String,
    pub major: bool,
}

impl ChangeSet {
    pub fn new(id: impl Into<String>, actor: impl Into<String>, team: impl Into<String>) -> Self {
        ChangeSet {
            id: id.into(),
            actor: actor.into(),
            team: team.into(),
            major: false,
        }
    }

    pub fn major(mut self, major: bool) -> Self {
        self.major = major;
        self
    }

    pub fn system() -> Self {
        ChangeSet::new("init", SYSTEM_ACTOR, SYSTEM_ACTOR)
    }
}

/// Whether endpoint-type violations reject a link or are left to validity checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TypeCheck {
    #[default]
    Enforce,
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MappedLink {
    pub mapping: ArtifactId,
    pub source_link: LinkId,
    pub target_link: LinkId,
}

/// Role links hanging off one mapping object.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MappingPartners {
    pub sources: Vec<ArtifactId>,
    pub targets: Vec<ArtifactId>,
    pub links: Vec<LinkId>,
}

pub(crate) struct Pending {
    pub op_kind: OpKind,
    pub subject_ids: Vec<String>,
    pub payload: Payload,
}

impl Pending {
    pub fn artifact(op_kind: OpKind, a: &Artifact) -> Pending {
        Pending {
            op_kind,
            subject_ids: vec![a.id.0.clone()],
            payload: Payload::Artifact(a.without_history()),
        }
    }

    pub fn link(op_kind: OpKind, l: &TraceLink) -> Pending {
        Pending {
            op_kind,
            subject_ids: vec![l.id.0.clone()],
            payload: Payload::Link(l.without_history()),
        }
    }
}

/// Hands out fresh ids for elements that are not committed yet.
#[derive(Debug, Clone)]
pub(crate) struct IdAlloc {
    next_artifact: u64,
    next_link: u64,
}

impl IdAlloc {
    pub fn artifact(&mut self) -> ArtifactId {
        let id = ArtifactId::from_seq(self.next_artifact);
        self.next_artifact += 1;
        id
    }

    pub fn link(&mut self) -> LinkId {
        let id = LinkId::from_seq(self.next_link);
        self.next_link += 1;
        id
    }
}

#[derive(Debug, Default, Clone)]
struct Index {
    incident: HashMap<ArtifactId, BTreeSet<LinkId>>,
    by_link_type: HashMap<String, BTreeSet<LinkId>>,
    by_change_set: HashMap<String, Vec<usize>>,
    frozen: HashSet<(String, u32)>,
}

/// Elements written since the last save.
#[derive(Debug, Default, Clone)]
pub(crate) struct Dirty {
    pub tim: bool,
    pub users: bool,
    pub artifacts: BTreeSet<ArtifactId>,
    pub links: BTreeSet<LinkId>,
    pub baselines: BTreeSet<BaselineId>,
}

#[derive(Debug, Clone)]
pub struct Repository {
    state: RepoState,
    journal: Vec<ChangeJournalEntry>,
    clock: Clock,
    index: Index,
    next_artifact: u64,
    next_link: u64,
    next_baseline: u64,
    next_change_set: u64,
    pub(crate) dirty: Dirty,
    pub(crate) persisted_entries: usize,
}

impl Repository {
    /// Fresh repository whose first journal entry installs `schema`.
    pub fn new(schema: TimSchema, clock: Clock) -> Result<Repository> {
        let errors = validate_tim(&schema);
        if !errors.is_empty() {
            let msgs: Vec<String> = errors.iter().map(ToString::to_string).collect();
            return Err(Error::InvalidSchema(msgs.join("; ")));
        }
        let mut repo = Repository::empty(clock);
        repo.commit(
            &ChangeSet::system(),
            vec![Pending {
                op_kind: OpKind::Create,
                subject_ids: vec![schema.schema_id.clone()],
                payload: Payload::Tim(schema),
            }],
        );
        Ok(repo)
    }

    fn empty(clock: Clock) -> Repository {
        Repository {
            state: RepoState::empty(),
            journal: Vec::new(),
            clock,
            index: Index::default(),
            next_artifact: 1,
            next_link: 1,
            next_baseline: 1,
            next_change_set: 1,
            dirty: Dirty::default(),
            persisted_entries: 0,
        }
    }

    /// Rebuilds a repository by applying journal entries to an empty state.
    pub fn replay<I>(entries: I, clock: Clock) -> Result<Repository>
    where
        I: IntoIterator<Item = ChangeJournalEntry>,
    {
        let mut repo = Repository::empty(clock);
        for entry in entries {
            if let Some(last) = repo.journal.last() {
                if entry.seq <= last.seq {
                    return Err(Error::CorruptJournal(format!(
                        "seq {} follows {}",
                        entry.seq, last.seq
                    )));
                }
            }
            repo.apply(&entry.payload);
            repo.track_entry(&entry);
            repo.journal.push(entry);
        }
        repo.persisted_entries = repo.journal.len();
        repo.dirty = Dirty::default();
        Ok(repo)
    }

    /// Assembles a repository from separately persisted state and journal.
    pub fn from_parts(
        state: RepoState,
        journal: Vec<ChangeJournalEntry>,
        clock: Clock,
    ) -> Result<Repository> {
        let mut repo = Repository::empty(clock);
        for w in journal.windows(2) {
            if w[1].seq <= w[0].seq {
                return Err(Error::CorruptJournal(format!(
                    "seq {} follows {}",
                    w[1].seq, w[0].seq
                )));
            }
        }
        repo.state.tim = state.tim;
        repo.state.users = state.users;
        for (_, a) in state.artifacts {
            repo.note_artifact_id(&a.id);
            repo.state.artifacts.insert(a.id.clone(), a);
        }
        for (_, l) in state.links {
            repo.note_link_id(&l.id);
            repo.index_link(&l);
            repo.state.links.insert(l.id.clone(), l);
        }
        for (_, b) in state.baselines {
            repo.put_baseline(b);
        }
        for entry in &journal {
            repo.track_change_set_id(&entry.change_set_id);
        }
        repo.journal = journal;
        for i in 0..repo.journal.len() {
            let cs = repo.journal[i].change_set_id.clone();
            repo.index.by_change_set.entry(cs).or_default().push(i);
        }
        repo.persisted_entries = repo.journal.len();
        Ok(repo)
    }

    // ---- commit / apply -------------------------------------------------

    pub(crate) fn commit(&mut self, cs: &ChangeSet, pending: Vec<Pending>) -> Vec<u64> {
        let now = self.clock.now();
        let mut seqs = Vec::with_capacity(pending.len());
        for p in pending {
            let seq = self.journal.last().map_or(1, |e| e.seq + 1);
            self.apply(&p.payload);
            let entry = ChangeJournalEntry {
                seq,
                timestamp: now,
                actor: cs.actor.clone(),
                team: cs.team.clone(),
                change_set_id: cs.id.clone(),
                op_kind: p.op_kind,
                subject_ids: p.subject_ids,
                major: cs.major,
                payload: p.payload,
            };
            self.track_entry(&entry);
            self.journal.push(entry);
            seqs.push(seq);
        }
        seqs
    }

    fn track_entry(&mut self, entry: &ChangeJournalEntry) {
        self.track_change_set_id(&entry.change_set_id);
        self.index
            .by_change_set
            .entry(entry.change_set_id.clone())
            .or_default()
            .push(self.journal.len());
    }

    fn track_change_set_id(&mut self, id: &str) {
        if let Some(n) = id.strip_prefix("cs-").and_then(|n| n.parse::<u64>().ok()) {
            self.next_change_set = self.next_change_set.max(n + 1);
        }
    }

    fn apply(&mut self, payload: &Payload) {
        match payload {
            Payload::Tim(schema) => {
                self.state.tim = schema.clone();
                self.dirty.tim = true;
            }
            Payload::User(user) => {
                self.state.users.insert(user.id.clone(), user.clone());
                self.dirty.users = true;
            }
            Payload::Artifact(a) => {
                let mut a = a.clone();
                self.note_artifact_id(&a.id);
                if let Some(old) = self.state.artifacts.get_mut(&a.id) {
                    let mut history = std::mem::take(&mut old.history);
                    if a.version > old.version {
                        history.push(old.snapshot());
                    }
                    a.history = history;
                } else {
                    a.history.clear();
                }
                self.dirty.artifacts.insert(a.id.clone());
                self.state.artifacts.insert(a.id.clone(), a);
            }
            Payload::Link(l) => {
                let mut l = l.clone();
                self.note_link_id(&l.id);
                if let Some(old) = self.state.links.remove(&l.id) {
                    self.unindex_link(&old);
                    let mut history = old.history.clone();
                    if l.version > old.version {
                        history.push(old.snapshot());
                    }
                    l.history = history;
                } else {
                    l.history.clear();
                }
                self.index_link(&l);
                self.dirty.links.insert(l.id.clone());
                self.state.links.insert(l.id.clone(), l);
            }
            Payload::Baseline(b) => {
                self.dirty.baselines.insert(b.id.clone());
                self.put_baseline(b.clone());
            }
        }
    }

    fn put_baseline(&mut self, b: Baseline) {
        if let Some(n) = b.id.seq() {
            self.next_baseline = self.next_baseline.max(n + 1);
        }
        for (id, v) in &b.artifact_versions {
            self.index.frozen.insert((id.0.clone(), *v));
        }
        for (id, v) in &b.link_versions {
            self.index.frozen.insert((id.0.clone(), *v));
        }
        self.state.baselines.insert(b.id.clone(), b);
    }

    fn note_artifact_id(&mut self, id: &ArtifactId) {
        if let Some(n) = id.seq() {
            self.next_artifact = self.next_artifact.max(n + 1);
        }
    }

    fn note_link_id(&mut self, id: &LinkId) {
        if let Some(n) = id.seq() {
            self.next_link = self.next_link.max(n + 1);
        }
    }

    fn index_link(&mut self, l: &TraceLink) {
        if !l.is_live() {
            return;
        }
        for e in l.endpoints() {
            self.index
                .incident
                .entry(e.clone())
                .or_default()
                .insert(l.id.clone());
        }
        self.index
            .by_link_type
            .entry(l.link_type.clone())
            .or_default()
            .insert(l.id.clone());
    }

    fn unindex_link(&mut self, l: &TraceLink) {
        for e in l.endpoints() {
            if let Some(set) = self.index.incident.get_mut(e) {
                set.remove(&l.id);
            }
        }
        if let Some(set) = self.index.by_link_type.get_mut(&l.link_type) {
            set.remove(&l.id);
        }
    }

    pub(crate) fn allocator(&self) -> IdAlloc {
        IdAlloc {
            next_artifact: self.next_artifact,
            next_link: self.next_link,
        }
    }

    pub(crate) fn next_baseline_id(&self) -> BaselineId {
        BaselineId::from_seq(self.next_baseline)
    }

    pub(crate) fn now(&self) -> Timestamp {
        self.clock.now()
    }

    // ---- accessors -----------------------------------------------------

    pub fn state(&self) -> &RepoState {
        &self.state
    }

    pub fn tim(&self) -> &TimSchema {
        &self.state.tim
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    pub fn set_clock(&mut self, clock: Clock) {
        self.clock = clock;
    }

    pub fn users(&self) -> impl Iterator<Item = &User> {
        self.state.users.values()
    }

    pub fn user(&self, id: &str) -> Option<&User> {
        self.state.users.get(id)
    }

    /// Any stored artifact, including tombstoned ones.
    pub fn artifact(&self, id: &ArtifactId) -> Option<&Artifact> {
        self.state.artifacts.get(id)
    }

    pub fn live_artifact(&self, id: &ArtifactId) -> Result<&Artifact> {
        self.state
            .artifacts
            .get(id)
            .filter(|a| a.is_live())
            .ok_or_else(|| Error::NotFound(id.0.clone()))
    }

    pub fn artifacts(&self) -> impl Iterator<Item = &Artifact> {
        self.state.artifacts.values().filter(|a| a.is_live())
    }

    pub fn link(&self, id: &LinkId) -> Option<&TraceLink> {
        self.state.links.get(id)
    }

    pub fn live_link(&self, id: &LinkId) -> Result<&TraceLink> {
        self.state
            .links
            .get(id)
            .filter(|l| l.is_live())
            .ok_or_else(|| Error::NotFound(id.0.clone()))
    }

    pub fn links(&self) -> impl Iterator<Item = &TraceLink> {
        self.state.links.values().filter(|l| l.is_live())
    }

    pub fn links_of_type<'a>(&'a self, link_type: &str) -> impl Iterator<Item = &'a TraceLink> + 'a {
        self.index
            .by_link_type
            .get(link_type)
            .into_iter()
            .flatten()
            .filter_map(|id| self.state.links.get(id))
    }

    /// Live links with `id` among their endpoints.
    pub fn incident_links<'a>(&'a self, id: &ArtifactId) -> impl Iterator<Item = &'a TraceLink> + 'a {
        self.index
            .incident
            .get(id)
            .into_iter()
            .flatten()
            .filter_map(|l| self.state.links.get(l))
    }

    pub fn baselines(&self) -> impl Iterator<Item = &Baseline> {
        self.state.baselines.values()
    }

    pub fn baseline(&self, id: &BaselineId) -> Result<&Baseline> {
        self.state
            .baselines
            .get(id)
            .ok_or_else(|| Error::UnknownBaseline(id.0.clone()))
    }

    pub fn journal(&self) -> &[ChangeJournalEntry] {
        &self.journal
    }

    pub fn query_journal(&self, filter: &JournalFilter) -> Vec<&ChangeJournalEntry> {
        journal::query(&self.journal, filter)
    }

    pub fn change_set_entries<'a>(
        &'a self,
        change_set_id: &str,
    ) -> impl Iterator<Item = &'a ChangeJournalEntry> + 'a {
        self.index
            .by_change_set
            .get(change_set_id)
            .into_iter()
            .flatten()
            .map(|&i| &self.journal[i])
    }

    /// Issues a change set with the next free `cs-<n>` id.
    pub fn change_set(&mut self, actor: &str, team: &str) -> ChangeSet {
        let id = format!("cs-{}", self.next_change_set);
        self.next_change_set += 1;
        ChangeSet::new(id, actor, team)
    }

    /// Baseline freezing `id` at `version`, if any.
    pub fn frozen_in(&self, id: &str, version: u32) -> Option<&BaselineId> {
        if !self.index.frozen.contains(&(id.to_string(), version)) {
            return None;
        }
        self.state.baselines.values().find_map(|b| {
            let hit = b
                .artifact_versions
                .get(&ArtifactId::new(id))
                .or_else(|| b.link_versions.get(&LinkId::new(id)));
            (hit == Some(&version)).then_some(&b.id)
        })
    }

    pub fn is_mapping_object(&self, a: &Artifact) -> bool {
        self.state.tim.is_mapping_type(&a.type_name)
    }

    /// SHA-256 over the canonical JSON encoding of the committed state.
    pub fn state_hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.state).expect("state serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    // ---- graph queries -------------------------------------------------

    /// Role links of the mapping object `mapping`.
    pub fn mapping_partners(&self, mapping: &ArtifactId) -> MappingPartners {
        let mut p = MappingPartners::default();
        for l in self.incident_links(mapping) {
            let Some(role) = l.mapping_role else { continue };
            if !l.sources.contains(mapping) {
                continue;
            }
            p.links.push(l.id.clone());
            let side = match role {
                MappingRole::Source => &mut p.sources,
                MappingRole::Target => &mut p.targets,
            };
            side.extend(l.targets.iter().cloned());
        }
        p
    }

    /// Endpoint pairs related by `link_type`, whichever way the instances are mediated.
    ///
    /// Plain links contribute `sources x targets`; role links are grouped by
    /// their mapping object, which relates each source-role target to each
    /// target-role target.
    pub fn related_pairs(&self, link_type: &str) -> Result<BTreeSet<(ArtifactId, ArtifactId)>> {
        if self.state.tim.link_type(link_type).is_none() {
            return Err(Error::UnknownLinkType(link_type.to_string()));
        }
        let mut pairs = BTreeSet::new();
        let mut mapped: BTreeMap<&ArtifactId, (Vec<&ArtifactId>, Vec<&ArtifactId>)> =
            BTreeMap::new();
        for l in self.links_of_type(link_type) {
            match (l.mapping_role, l.sources.as_slice()) {
                (Some(role), [mapping]) => {
                    let entry = mapped.entry(mapping).or_default();
                    let side = match role {
                        MappingRole::Source => &mut entry.0,
                        MappingRole::Target => &mut entry.1,
                    };
                    side.extend(l.targets.iter());
                }
                _ => {
                    for s in &l.sources {
                        for t in &l.targets {
                            pairs.insert((s.clone(), t.clone()));
                        }
                    }
                }
            }
        }
        for (_, (srcs, tgts)) in mapped {
            for s in &srcs {
                for t in &tgts {
                    pairs.insert(((*s).clone(), (*t).clone()));
                }
            }
        }
        Ok(pairs)
    }

    /// Artifacts linked to `id` directly or through one mapping object.
    /// Mapping objects on the way are included; `id` itself is not.
    pub fn neighbors(&self, id: &ArtifactId) -> BTreeSet<ArtifactId> {
        self.neighbors_where(id, |_| true)
    }

    pub fn neighbors_where(
        &self,
        id: &ArtifactId,
        keep: impl Fn(&TraceLink) -> bool,
    ) -> BTreeSet<ArtifactId> {
        let mut out = BTreeSet::new();
        for l in self.incident_links(id).filter(|l| keep(l)) {
            for other in l.endpoints().filter(|e| *e != id) {
                if !out.insert(other.clone()) {
                    continue;
                }
                let is_mapping = self
                    .state
                    .artifacts
                    .get(other)
                    .is_some_and(|a| a.is_live() && self.is_mapping_object(a));
                if !is_mapping {
                    continue;
                }
                for ml in self.incident_links(other).filter(|l| keep(l)) {
                    for e in ml.endpoints() {
                        if e != id && e != other {
                            out.insert(e.clone());
                        }
                    }
                }
            }
        }
        out
    }

    // ---- mutations -----------------------------------------------------

    pub(crate) fn require_actor(&self, cs: &ChangeSet) -> Result<()> {
        if self.state.users.contains_key(&cs.actor) {
            Ok(())
        } else {
            Err(Error::UnknownUser(cs.actor.clone()))
        }
    }

    pub fn register_user(&mut self, cs: &ChangeSet, user: User) -> Result<()> {
        if user.id.trim().is_empty() {
            return Err(Error::UnknownUser(user.id));
        }
        let subject = user.id.clone();
        self.commit(
            cs,
            vec![Pending {
                op_kind: if self.state.users.contains_key(&user.id) {
                    OpKind::Update
                } else {
                    OpKind::Create
                },
                subject_ids: vec![subject],
                payload: Payload::User(user),
            }],
        );
        Ok(())
    }

    pub(crate) fn check_attributes(
        def: &ArtifactTypeDef,
        id: &str,
        attributes: &Attributes,
    ) -> Result<()> {
        for attr in &def.attributes {
            match attributes.get(&attr.name) {
                None if attr.required => {
                    return Err(Error::MissingRequiredAttribute {
                        artifact: id.to_string(),
                        attribute: attr.name.clone(),
                    })
                }
                Some(v) if !v.conforms(&attr.kind) => {
                    return Err(Error::AttributeKind {
                        attribute: attr.name.clone(),
                        expected: attr.kind.to_string(),
                        value: v.to_string(),
                    })
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub(crate) fn build_artifact(
        &self,
        cs: &ChangeSet,
        id: ArtifactId,
        def: &ArtifactTypeDef,
        title: &str,
        attributes: Attributes,
    ) -> Artifact {
        let now = self.now();
        Artifact {
            id,
            type_name: def.name.clone(),
            title: title.to_string(),
            attributes,
            status: Status::InWork,
            version: 1,
            scope: if def.area == Area::External {
                Scope::External
            } else {
                Scope::LocallyRelevant
            },
            team: cs.team.clone(),
            created_by: cs.actor.clone(),
            created_at: now,
            changed_by: cs.actor.clone(),
            changed_at: now,
            ownership: None,
            deleted: false,
            history: Vec::new(),
        }
    }

    pub fn create_artifact(
        &mut self,
        cs: &ChangeSet,
        type_name: &str,
        title: &str,
        attributes: Attributes,
    ) -> Result<ArtifactId> {
        self.require_actor(cs)?;
        let def = self
            .state
            .tim
            .artifact_type(type_name)
            .ok_or_else(|| Error::UnknownType(type_name.to_string()))?;
        let id = self.allocator().artifact();
        Self::check_attributes(def, id.as_str(), &attributes)?;
        let artifact = self.build_artifact(cs, id.clone(), def, title, attributes);
        self.commit(cs, vec![Pending::artifact(OpKind::Create, &artifact)]);
        Ok(id)
    }

    /// Edits an artifact; whether the version is bumped is decided by `policies`.
    pub fn update_artifact(
        &mut self,
        cs: &ChangeSet,
        id: &ArtifactId,
        changes: ArtifactChanges,
        policies: &PolicyTable,
    ) -> Result<VersionOutcome> {
        versioning::apply_change_with_policy(
            self,
            Change::Artifact {
                id: id.clone(),
                changes,
            },
            cs,
            policies,
        )
    }

    pub fn update_link(
        &mut self,
        cs: &ChangeSet,
        id: &LinkId,
        changes: LinkChanges,
        policies: &PolicyTable,
    ) -> Result<VersionOutcome> {
        versioning::apply_change_with_policy(
            self,
            Change::Link {
                id: id.clone(),
                changes,
            },
            cs,
            policies,
        )
    }

    fn resolve_endpoints(&self, ids: &[ArtifactId]) -> Result<Vec<&Artifact>> {
        ids.iter()
            .map(|id| {
                self.state
                    .artifacts
                    .get(id)
                    .filter(|a| a.is_live())
                    .ok_or_else(|| Error::DanglingEndpoint(id.0.clone()))
            })
            .collect()
    }

    pub(crate) fn pin_versions(&self, ids: &[&ArtifactId]) -> BTreeMap<ArtifactId, u32> {
        ids.iter()
            .filter_map(|id| self.state.artifacts.get(*id).map(|a| ((*id).clone(), a.version)))
            .collect()
    }

    /// Creates a direct (or generic) trace link.
    pub fn create_link(
        &mut self,
        cs: &ChangeSet,
        link_type: &str,
        sources: Vec<ArtifactId>,
        targets: Vec<ArtifactId>,
        check: TypeCheck,
    ) -> Result<LinkId> {
        self.require_actor(cs)?;
        let def = self
            .state
            .tim
            .link_type(link_type)
            .ok_or_else(|| Error::UnknownLinkType(link_type.to_string()))?;
        if def.mediation == Mediation::Mapped && !def.is_generic() {
            return Err(Error::MappedLinkType(link_type.to_string()));
        }
        for (side, ids, arity) in [
            ("sources", &sources, def.source_arity),
            ("targets", &targets, def.target_arity),
        ] {
            if !arity.admits(ids.len()) {
                return Err(Error::ArityViolation {
                    link_type: link_type.to_string(),
                    side,
                    arity: arity.as_str(),
                    count: ids.len(),
                });
            }
        }
        let src = self.resolve_endpoints(&sources)?;
        let tgt = self.resolve_endpoints(&targets)?;
        if check == TypeCheck::Enforce {
            for a in &src {
                if !def.permits_source(&a.type_name) {
                    return Err(type_mismatch(link_type, "source", a));
                }
            }
            for a in &tgt {
                if !def.permits_target(&a.type_name) {
                    return Err(type_mismatch(link_type, "target", a));
                }
            }
        }
        let endpoints: Vec<ArtifactId> = sources.iter().chain(&targets).cloned().collect();
        let group = org::classify_endpoints(self, &endpoints)?;
        let now = self.now();
        let id = self.allocator().link();
        let link = TraceLink {
            id: id.clone(),
            link_type: link_type.to_string(),
            endpoint_versions: self.pin_versions(&endpoints.iter().collect::<Vec<_>>()),
            sources,
            targets,
            attributes: Attributes::new(),
            status: Status::InWork,
            version: 1,
            rigidity_group: group,
            mapping_role: None,
            created_by: cs.actor.clone(),
            created_at: now,
            changed_by: cs.actor.clone(),
            changed_at: now,
            deleted: false,
            history: Vec::new(),
        };
        self.commit(cs, vec![Pending::link(OpKind::Create, &link)]);
        Ok(id)
    }

    /// Creates a mapping object relating `a` to `b`, plus its two role links,
    /// in one commit.
    pub fn create_mapped_link(
        &mut self,
        cs: &ChangeSet,
        link_type: &str,
        a: &ArtifactId,
        b: &ArtifactId,
        check: TypeCheck,
    ) -> Result<MappedLink> {
        self.require_actor(cs)?;
        let def = self
            .state
            .tim
            .link_type(link_type)
            .ok_or_else(|| Error::UnknownLinkType(link_type.to_string()))?;
        if def.mediation != Mediation::Mapped {
            return Err(Error::NotMappedType(link_type.to_string()));
        }
        let mapping_def = self.state.tim.mapping_type().ok_or(Error::NoMappingType)?;
        let ends = self.resolve_endpoints(&[a.clone(), b.clone()])?;
        if check == TypeCheck::Enforce {
            if !def.permits_source(&ends[0].type_name) {
                return Err(type_mismatch(link_type, "source", ends[0]));
            }
            if !def.permits_target(&ends[1].type_name) {
                return Err(type_mismatch(link_type, "target", ends[1]));
            }
        }
        let mut alloc = self.allocator();
        let pending =
            self.mapped_triple(cs, &mut alloc, link_type, mapping_def, a, b, Attributes::new())?;
        let ids = MappedLink {
            mapping: subject_artifact(&pending[0]),
            source_link: LinkId::new(pending[1].subject_ids[0].clone()),
            target_link: LinkId::new(pending[2].subject_ids[0].clone()),
        };
        self.commit(cs, pending);
        Ok(ids)
    }

    /// Pending entries for one mapping object and its two role links.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn mapped_triple(
        &self,
        cs: &ChangeSet,
        alloc: &mut IdAlloc,
        link_type: &str,
        mapping_def: &ArtifactTypeDef,
        a: &ArtifactId,
        b: &ArtifactId,
        link_attributes: Attributes,
    ) -> Result<Vec<Pending>> {
        let mid = alloc.artifact();
        let mut mapping = self.build_artifact(
            cs,
            mid.clone(),
            mapping_def,
            &format!("{link_type}: {a} -> {b}"),
            Attributes::new(),
        );
        mapping.scope = Scope::LocallyRelevant;
        Self::check_attributes(mapping_def, mid.as_str(), &mapping.attributes)?;
        let group = org::classify_endpoints(self, &[a.clone(), b.clone()])?;
        let now = self.now();
        let mut out = vec![Pending::artifact(OpKind::Create, &mapping)];
        for (role, end) in [(MappingRole::Source, a), (MappingRole::Target, b)] {
            let mut endpoint_versions = self.pin_versions(&[end]);
            endpoint_versions.insert(mid.clone(), 1);
            let link = TraceLink {
                id: alloc.link(),
                link_type: link_type.to_string(),
                sources: vec![mid.clone()],
                targets: vec![end.clone()],
                endpoint_versions,
                attributes: link_attributes.clone(),
                status: Status::InWork,
                version: 1,
                rigidity_group: group,
                mapping_role: Some(role),
                created_by: cs.actor.clone(),
                created_at: now,
                changed_by: cs.actor.clone(),
                changed_at: now,
                deleted: false,
                history: Vec::new(),
            };
            out.push(Pending::link(OpKind::Create, &link));
        }
        Ok(out)
    }

    /// Tombstones an artifact together with its live incident links.
    pub fn delete_artifact(&mut self, cs: &ChangeSet, id: &ArtifactId) -> Result<Vec<LinkId>> {
        self.require_actor(cs)?;
        let artifact = self.live_artifact(id)?;
        if artifact.scope == Scope::External {
            return Err(Error::ReadOnlyImported(id.0.clone()));
        }
        let now = self.now();
        let mut pending = Vec::new();
        let mut removed = Vec::new();
        for l in self.incident_links(id) {
            let mut l = l.without_history();
            l.deleted = true;
            l.changed_by = cs.actor.clone();
            l.changed_at = now;
            removed.push(l.id.clone());
            pending.push(Pending::link(OpKind::Delete, &l));
        }
        let mut a = artifact.without_history();
        a.deleted = true;
        a.changed_by = cs.actor.clone();
        a.changed_at = now;
        pending.push(Pending::artifact(OpKind::Delete, &a));
        self.commit(cs, pending);
        Ok(removed)
    }

    pub fn delete_link(&mut self, cs: &ChangeSet, id: &LinkId) -> Result<()> {
        self.require_actor(cs)?;
        let mut l = self.live_link(id)?.without_history();
        l.deleted = true;
        l.changed_by = cs.actor.clone();
        l.changed_at = self.now();
        self.commit(cs, vec![Pending::link(OpKind::Delete, &l)]);
        Ok(())
    }

    /// Changes an artifact's type; the new type must exist in the active TIM.
    pub fn retype_artifact(&mut self, cs: &ChangeSet, id: &ArtifactId, type_name: &str) -> Result<()> {
        self.require_actor(cs)?;
        let def = self
            .state
            .tim
            .artifact_type(type_name)
            .ok_or_else(|| Error::UnknownType(type_name.to_string()))?;
        let mut a = self.live_artifact(id)?.without_history();
        if a.scope == Scope::External {
            return Err(Error::ReadOnlyImported(id.0.clone()));
        }
        if self.state.tim.is_mapping_type(&a.type_name) || self.state.tim.is_mapping_type(type_name) {
            return Err(Error::MappingRetype(id.0.clone()));
        }
        Self::check_attributes(def, id.as_str(), &a.attributes)?;
        a.type_name = type_name.to_string();
        a.changed_by = cs.actor.clone();
        a.changed_at = self.now();
        self.commit(cs, vec![Pending::artifact(OpKind::Retype, &a)]);
        Ok(())
    }

    /// Sets an artifact's scope and reclassifies the rigidity of its incident links.
    pub fn set_scope(&mut self, cs: &ChangeSet, id: &ArtifactId, scope: Scope) -> Result<Vec<LinkId>> {
        self.require_actor(cs)?;
        let mut a = self.live_artifact(id)?.without_history();
        if a.scope == scope {
            return Ok(vec![]);
        }
        a.scope = scope;
        a.changed_by = cs.actor.clone();
        a.changed_at = self.now();
        self.commit(cs, vec![Pending::artifact(OpKind::ScopeChange, &a)]);
        self.reclassify_links_around(cs, id)
    }

    pub(crate) fn reclassify_links_around(
        &mut self,
        cs: &ChangeSet,
        id: &ArtifactId,
    ) -> Result<Vec<LinkId>> {
        let mut candidates: BTreeSet<LinkId> =
            self.incident_links(id).map(|l| l.id.clone()).collect();
        // links hanging off mapping objects next to `id` classify by their partners
        for l in self.incident_links(id) {
            for e in l.endpoints() {
                if let Some(m) = self.artifact(e).filter(|m| self.is_mapping_object(m)) {
                    candidates.extend(self.incident_links(&m.id).map(|l| l.id.clone()));
                }
            }
        }
        let mut pending = Vec::new();
        let mut changed = Vec::new();
        for lid in candidates {
            let l = &self.state.links[&lid];
            let group = org::classify_rigidity(self, l)?;
            if group != l.rigidity_group {
                let mut l = l.without_history();
                l.rigidity_group = group;
                changed.push(lid);
                pending.push(Pending::link(OpKind::Update, &l));
            }
        }
        if !pending.is_empty() {
            self.commit(cs, pending);
        }
        Ok(changed)
    }
}

pub(crate) fn subject_artifact(p: &Pending) -> ArtifactId {
    ArtifactId::new(p.subject_ids[0].clone())
}

fn type_mismatch(link_type: &str, side: &'static str, a: &Artifact) -> Error {
    Error::TypeMismatch {
        link_type: link_type.to_string(),
        side,
        artifact: a.id.0.clone(),
        artifact_type: a.type_name.clone(),
    }
}
