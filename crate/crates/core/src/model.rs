//! Instance-level data: artifacts, trace links and ownership.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::{ArtifactId, LinkId, Timestamp};
use crate::tim::AttributeKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    InWork,
    Released,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    LocallyRelevant,
    HorizontalBoundary,
    VerticalBoundary,
    External,
}

impl Scope {
    pub const ALL: [Scope; 4] = [
        Scope::LocallyRelevant,
        Scope::HorizontalBoundary,
        Scope::VerticalBoundary,
        Scope::External,
    ];

    pub fn is_boundary(self) -> bool {
        matches!(self, Scope::HorizontalBoundary | Scope::VerticalBoundary)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scope::LocallyRelevant => "locally-relevant",
            Scope::HorizontalBoundary => "horizontal-boundary",
            Scope::VerticalBoundary => "vertical-boundary",
            Scope::External => "external",
        }
    }

    pub fn parse(s: &str) -> Option<Scope> {
        Scope::ALL.into_iter().find(|v| v.as_str() == s)
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Organisational distance of a link; `G1` is the most rigid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RigidityGroup {
    #[serde(rename = "G1-cross-company")]
    G1CrossCompany,
    #[serde(rename = "G2-cross-abstraction")]
    G2CrossAbstraction,
    #[serde(rename = "G3-cross-team")]
    G3CrossTeam,
    #[serde(rename = "G4-intra-team")]
    G4IntraTeam,
}

impl RigidityGroup {
    pub const ALL: [RigidityGroup; 4] = [
        RigidityGroup::G1CrossCompany,
        RigidityGroup::G2CrossAbstraction,
        RigidityGroup::G3CrossTeam,
        RigidityGroup::G4IntraTeam,
    ];

    pub fn short(self) -> &'static str {
        match self {
            RigidityGroup::G1CrossCompany => "G1",
            RigidityGroup::G2CrossAbstraction => "G2",
            RigidityGroup::G3CrossTeam => "G3",
            RigidityGroup::G4IntraTeam => "G4",
        }
    }

    pub fn parse(s: &str) -> Option<RigidityGroup> {
        RigidityGroup::ALL
            .into_iter()
            .find(|g| g.short().eq_ignore_ascii_case(s) || g.long() == s)
    }

    fn long(self) -> &'static str {
        match self {
            RigidityGroup::G1CrossCompany => "G1-cross-company",
            RigidityGroup::G2CrossAbstraction => "G2-cross-abstraction",
            RigidityGroup::G3CrossTeam => "G3-cross-team",
            RigidityGroup::G4IntraTeam => "G4-intra-team",
        }
    }
}

impl fmt::Display for RigidityGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.long())
    }
}

/// Which side of a mediated pair a mapping-object link points at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MappingRole {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Integer(i64),
    Real(f64),
    Text(String),
}

impl AttrValue {
    pub fn conforms(&self, kind: &AttributeKind) -> bool {
        match (kind, self) {
            (AttributeKind::Text, AttrValue::Text(_)) => true,
            (AttributeKind::Integer, AttrValue::Integer(_)) => true,
            (AttributeKind::Real, AttrValue::Real(v)) => v.is_finite(),
            (AttributeKind::Real, AttrValue::Integer(_)) => true,
            (AttributeKind::EnumOf(values), AttrValue::Text(s)) => values.contains(s),
            _ => false,
        }
    }

    /// Parses command-line text according to the declared kind, falling back to text.
    pub fn parse_as(text: &str, kind: Option<&AttributeKind>) -> AttrValue {
        match kind {
            Some(AttributeKind::Integer) => text
                .parse()
                .map(AttrValue::Integer)
                .unwrap_or_else(|_| AttrValue::Text(text.to_string())),
            Some(AttributeKind::Real) => text
                .parse()
                .map(AttrValue::Real)
                .unwrap_or_else(|_| AttrValue::Text(text.to_string())),
            _ => AttrValue::Text(text.to_string()),
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            AttrValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Integer(v) => write!(f, "{v}"),
            AttrValue::Real(v) => write!(f, "{v}"),
            AttrValue::Text(v) => f.write_str(v),
        }
    }
}

impl From<&str> for AttrValue {
    fn from(s: &str) -> Self {
        AttrValue::Text(s.to_string())
    }
}

pub type Attributes = BTreeMap<String, AttrValue>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OwnershipRecord {
    pub artifact: ArtifactId,
    pub responsible: String,
    #[serde(default)]
    pub affected_users: BTreeSet<String>,
    pub team: String,
}

/// Content of an artifact at a superseded version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactVersion {
    pub version: u32,
    pub type_name: String,
    pub title: String,
    pub attributes: Attributes,
    pub status: Status,
    pub changed_by: String,
    pub changed_at: Timestamp,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub id: ArtifactId,
    pub type_name: String,
    pub title: String,
    #[serde(default)]
    pub attributes: Attributes,
    pub status: Status,
    pub version: u32,
    pub scope: Scope,
    pub team: String,
    pub created_by: String,
    pub created_at: Timestamp,
    pub changed_by: String,
    pub changed_at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ownership: Option<OwnershipRecord>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub deleted: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<ArtifactVersion>,
}

impl Artifact {
    pub fn is_live(&self) -> bool {
        !self.deleted
    }

    pub fn snapshot(&self) -> ArtifactVersion {
        ArtifactVersion {
            version: self.version,
            type_name: self.type_name.clone(),
            title: self.title.clone(),
            attributes: self.attributes.clone(),
            status: self.status,
            changed_by: self.changed_by.clone(),
            changed_at: self.changed_at,
        }
    }

    /// Content at `version`, if that version ever existed.
    pub fn at_version(&self, version: u32) -> Option<ArtifactVersion> {
        if version == self.version {
            return Some(self.snapshot());
        }
        self.history.iter().find(|v| v.version == version).cloned()
    }

    pub fn versions(&self) -> impl Iterator<Item = u32> + '_ {
        self.history
            .iter()
            .map(|v| v.version)
            .chain(std::iter::once(self.version))
    }

    pub fn attr_text(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).and_then(AttrValue::as_text)
    }

    pub(crate) fn without_history(&self) -> Artifact {
        Artifact {
            history: Vec::new(),
            ..self.clone_shallow()
        }
    }

    fn clone_shallow(&self) -> Artifact {
        Artifact {
            id: self.id.clone(),
            type_name: self.type_name.clone(),
            title: self.title.clone(),
            attributes: self.attributes.clone(),
            status: self.status,
            version: self.version,
            scope: self.scope,
            team: self.team.clone(),
            created_by: self.created_by.clone(),
            created_at: self.created_at,
            changed_by: self.changed_by.clone(),
            changed_at: self.changed_at,
            ownership: self.ownership.clone(),
            deleted: self.deleted,
            history: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkVersion {
    pub version: u32,
    pub link_type: String,
    pub sources: Vec<ArtifactId>,
    pub targets: Vec<ArtifactId>,
    pub endpoint_versions: BTreeMap<ArtifactId, u32>,
    pub attributes: Attributes,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLink {
    pub id: LinkId,
    pub link_type: String,
    pub sources: Vec<ArtifactId>,
    pub targets: Vec<ArtifactId>,
    /// Artifact version each endpoint referred to when the link was last (re)pinned.
    #[serde(default)]
    pub endpoint_versions: BTreeMap<ArtifactId, u32>,
    #[serde(default)]
    pub attributes: Attributes,
    pub status: Status,
    pub version: u32,
    pub rigidity_group: RigidityGroup,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping_role: Option<MappingRole>,
    pub created_by: String,
    pub created_at: Timestamp,
    pub changed_by: String,
    pub changed_at: Timestamp,
    #[serde(default, skip_serializing_if = "is_false")]
    pub deleted: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<LinkVersion>,
}

impl TraceLink {
    pub fn is_live(&self) -> bool {
        !self.deleted
    }

    pub fn endpoints(&self) -> impl Iterator<Item = &ArtifactId> {
        self.sources.iter().chain(self.targets.iter())
    }

    pub fn touches(&self, id: &ArtifactId) -> bool {
        self.endpoints().any(|e| e == id)
    }

    pub fn snapshot(&self) -> LinkVersion {
        LinkVersion {
            version: self.version,
            link_type: self.link_type.clone(),
            sources: self.sources.clone(),
            targets: self.targets.clone(),
            endpoint_versions: self.endpoint_versions.clone(),
            attributes: self.attributes.clone(),
            status: self.status,
        }
    }

    pub fn at_version(&self, version: u32) -> Option<LinkVersion> {
        if version == self.version {
            return Some(self.snapshot());
        }
        self.history.iter().find(|v| v.version == version).cloned()
    }

    pub(crate) fn without_history(&self) -> TraceLink {
        TraceLink {
            id: self.id.clone(),
            link_type: self.link_type.clone(),
            sources: self.sources.clone(),
            targets: self.targets.clone(),
            endpoint_versions: self.endpoint_versions.clone(),
            attributes: self.attributes.clone(),
            status: self.status,
            version: self.version,
            rigidity_group: self.rigidity_group,
            mapping_role: self.mapping_role,
            created_by: self.created_by.clone(),
            created_at: self.created_at,
            changed_by: self.changed_by.clone(),
            changed_at: self.changed_at,
            deleted: self.deleted,
            history: Vec::new(),
        }
    }
}

/// Requested edits to an artifact.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArtifactChanges {
    pub title: Option<String>,
    pub set_attributes: Attributes,
    pub remove_attributes: Vec<String>,
    pub status: Option<Status>,
    /// Explicit request for a new version regardless of policy.
    pub request_bump: bool,
}

impl ArtifactChanges {
    pub fn title(mut self, title: impl Into<String>) -> Self {
        self.title = Some(title.into());
        self
    }

    pub fn set(mut self, name: impl Into<String>, value: impl Into<AttrValue>) -> Self {
        self.set_attributes.insert(name.into(), value.into());
        self
    }

    pub fn status(mut self, status: Status) -> Self {
        self.status = Some(status);
        self
    }

    pub fn bump(mut self) -> Self {
        self.request_bump = true;
        self
    }
}

impl From<i64> for AttrValue {
    fn from(v: i64) -> Self {
        AttrValue::Integer(v)
    }
}

impl From<f64> for AttrValue {
    fn from(v: f64) -> Self {
        AttrValue::Real(v)
    }
}

impl From<String> for AttrValue {
    fn from(v: String) -> Self {
        AttrValue::Text(v)
    }
}

/// Requested edits to a trace link.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkChanges {
    pub set_attributes: Attributes,
    pub remove_attributes: Vec<String>,
    pub status: Option<Status>,
    /// Re-pin every endpoint to its current head version.
    pub refresh_endpoints: bool,
    pub request_bump: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attr_value_kinds() {
        let e = AttributeKind::EnumOf(vec!["Integer".into(), "Real".into()]);
        assert!(AttrValue::from("Integer").conforms(&e));
        assert!(!AttrValue::from("Bool").conforms(&e));
        assert!(AttrValue::Integer(3).conforms(&AttributeKind::Real));
        assert!(!AttrValue::Real(3.5).conforms(&AttributeKind::Integer));
        assert!(!AttrValue::Real(f64::NAN).conforms(&AttributeKind::Real));
        assert!(!AttrValue::Integer(1).conforms(&AttributeKind::Text));
    }

    #[test]
    fn attr_value_json_is_untagged() {
        let v: Attributes =
            serde_json::from_str(r#"{"a": 3, "b": 2.5, "c": "x", "d": 3.0}"#).unwrap();
        assert_eq!(v["a"], AttrValue::Integer(3));
        assert_eq!(v["b"], AttrValue::Real(2.5));
        assert_eq!(v["c"], AttrValue::from("x"));
        assert_eq!(v["d"], AttrValue::Real(3.0));
    }

    #[test]
    fn rigidity_group_names() {
        assert_eq!(
            serde_json::to_string(&RigidityGroup::G3CrossTeam).unwrap(),
            "\"G3-cross-team\""
        );
        assert_eq!(RigidityGroup::parse("g2"), Some(RigidityGroup::G2CrossAbstraction));
        assert!(RigidityGroup::G1CrossCompany < RigidityGroup::G4IntraTeam);
    }

    #[test]
    fn parse_as_follows_declared_kind() {
        assert_eq!(
            AttrValue::parse_as("7", Some(&AttributeKind::Integer)),
            AttrValue::Integer(7)
        );
        assert_eq!(
            AttrValue::parse_as("7", Some(&AttributeKind::Text)),
            AttrValue::from("7")
        );
        assert_eq!(AttrValue::parse_as("0.5", Some(&AttributeKind::Real)), AttrValue::Real(0.5));
    }
}
