//! Append-only change journal.
//!
//! Every committed mutation appends one [`ChangeJournalEntry`] per touched
//! element. Besides the bookkeeping fields, an entry carries the post-state
//! of the element as its [`Payload`], which is what makes replay possible.

use serde::{Deserialize, Serialize};

use crate::ids::Timestamp;
use crate::model::{Artifact, TraceLink};
use crate::org::User;
use crate::tim::TimSchema;
use crate::versioning::Baseline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpKind {
    Create,
    Update,
    Delete,
    Retype,
    ScopeChange,
    VersionBump,
}

/// Post-state of the element an entry touched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "kebab-case")]
pub enum Payload {
    Tim(TimSchema),
    User(User),
    Artifact(Artifact),
    Link(TraceLink),
    Baseline(Baseline),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeJournalEntry {
    pub seq: u64,
    pub timestamp: Timestamp,
    pub actor: String,
    pub team: String,
    pub change_set_id: String,
    pub op_kind: OpKind,
    pub subject_ids: Vec<String>,
    pub major: bool,
    pub payload: Payload,
}

impl ChangeJournalEntry {
    pub fn touches(&self, id: &str) -> bool {
        self.subject_ids.iter().any(|s| s == id)
    }

    pub fn is_artifact_change(&self) -> bool {
        matches!(self.payload, Payload::Artifact(_))
    }
}

/// All provided fields must match; `since_seq` is exclusive.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JournalFilter {
    pub actor: Option<String>,
    pub team: Option<String>,
    pub subject: Option<String>,
    pub since_seq: Option<u64>,
}

impl JournalFilter {
    pub fn matches(&self, e: &ChangeJournalEntry) -> bool {
        self.actor.as_ref().is_none_or(|a| &e.actor == a)
            && self.team.as_ref().is_none_or(|t| &e.team == t)
            && self.subject.as_ref().is_none_or(|s| e.touches(s))
            && self.since_seq.is_none_or(|s| e.seq > s)
    }
}

pub fn query<'a>(
    entries: &'a [ChangeJournalEntry],
    filter: &JournalFilter,
) -> Vec<&'a ChangeJournalEntry> {
    let start = match filter.since_seq {
        Some(s) => entries.partition_point(|e| e.seq <= s),
        None => 0,
    };
    entries[start..].iter().filter(|e| filter.matches(e)).collect()
}

pub fn to_line(entry: &ChangeJournalEntry) -> String {
    serde_json::to_string(entry).expect("journal entries serialize")
}
