//! Traceability information model: artifact types, link types, areas and
//! mediation, plus validation and schema diffing.
//!
//! A [`TimSchema`] is a plain value. [`validate_tim`] reports every
//! invariant violation, [`diff_tim`] turns two versions of a schema into an
//! ordered [`TimMigrationPlan`], and [`apply_schema_ops`] replays the schema
//! half of such a plan. Instance evolution lives in [`crate::change`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Source/target wildcard, only meaningful for generic hyperlinks.
pub const WILDCARD: &str = "*";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimSchema {
    pub schema_id: String,
    pub schema_version: u64,
    pub artifact_types: Vec<ArtifactTypeDef>,
    pub link_types: Vec<LinkTypeDef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Area {
    FunctionDefinition,
    SafetyAnalysis,
    Design,
    Testing,
    External,
}

/// Abstraction level used for rigidity classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Abstraction {
    Function,
    Design,
}

impl Area {
    pub fn abstraction(self) -> Option<Abstraction> {
        match self {
            Area::FunctionDefinition | Area::SafetyAnalysis => Some(Abstraction::Function),
            Area::Design => Some(Abstraction::Design),
            Area::Testing | Area::External => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactTypeDef {
    pub name: String,
    pub area: Area,
    #[serde(default)]
    pub attributes: Vec<AttributeDef>,
    #[serde(default)]
    pub is_mapping_type: bool,
}

impl ArtifactTypeDef {
    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    pub kind: AttributeKind,
    #[serde(default)]
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributeKind {
    Text,
    Integer,
    Real,
    EnumOf(Vec<String>),
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeKind::Text => f.write_str("text"),
            AttributeKind::Integer => f.write_str("integer"),
            AttributeKind::Real => f.write_str("real"),
            AttributeKind::EnumOf(values) => write!(f, "one of {}", values.join("|")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkSemantics {
    Satisfies,
    Refines,
    Allocates,
    DerivesFrom,
    Produces,
    Consumes,
    Mitigates,
    GenericHyperlink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mediation {
    Direct,
    Mapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arity {
    One,
    Many,
}

impl Arity {
    pub fn admits(self, count: usize) -> bool {
        match self {
            Arity::One => count == 1,
            Arity::Many => count >= 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Arity::One => "exactly one",
            Arity::Many => "one or more",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkTypeDef {
    pub name: String,
    pub semantics: LinkSemantics,
    pub source_types: BTreeSet<String>,
    pub target_types: BTreeSet<String>,
    pub mediation: Mediation,
    pub source_arity: Arity,
    pub target_arity: Arity,
}

impl LinkTypeDef {
    pub fn is_generic(&self) -> bool {
        self.semantics == LinkSemantics::GenericHyperlink
    }

    pub fn permits_source(&self, type_name: &str) -> bool {
        self.is_generic()
            || self.source_types.contains(WILDCARD)
            || self.source_types.contains(type_name)
    }

    pub fn permits_target(&self, type_name: &str) -> bool {
        self.is_generic()
            || self.target_types.contains(WILDCARD)
            || self.target_types.contains(type_name)
    }

    /// Equal in everything except the name.
    fn same_shape(&self, other: &LinkTypeDef) -> bool {
        self.semantics == other.semantics
            && self.source_types == other.source_types
            && self.target_types == other.target_types
            && self.mediation == other.mediation
            && self.source_arity == other.source_arity
            && self.target_arity == other.target_arity
    }
}

impl TimSchema {
    pub fn artifact_type(&self, name: &str) -> Option<&ArtifactTypeDef> {
        self.artifact_types.iter().find(|t| t.name == name)
    }

    pub fn link_type(&self, name: &str) -> Option<&LinkTypeDef> {
        self.link_types.iter().find(|t| t.name == name)
    }

    pub fn mapping_type(&self) -> Option<&ArtifactTypeDef> {
        self.artifact_types.iter().find(|t| t.is_mapping_type)
    }

    pub fn is_mapping_type(&self, name: &str) -> bool {
        self.artifact_type(name).is_some_and(|t| t.is_mapping_type)
    }

    /// Same schema with types sorted by name, the form used for equality.
    pub fn canonical(&self) -> TimSchema {
        let mut s = self.clone();
        s.artifact_types.sort_by(|a, b| a.name.cmp(&b.name));
        s.link_types.sort_by(|a, b| a.name.cmp(&b.name));
        s
    }

    pub fn structurally_equal(&self, other: &TimSchema) -> bool {
        self.canonical() == other.canonical()
    }

    pub fn from_json(text: &str) -> Result<TimSchema> {
        serde_json::from_str(text).map_err(|e| Error::json("tim.json", e))
    }
}

/// One invariant violation, naming the offending element.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SchemaError {
    pub element: String,
    pub message: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.element, self.message)
    }
}

/// Returns every violated schema invariant, sorted; empty iff the schema is valid.
pub fn validate_tim(schema: &TimSchema) -> Vec<SchemaError> {
    let mut errors = Vec::new();
    let mut err = |element: &str, message: String| {
        errors.push(SchemaError {
            element: element.to_string(),
            message,
        })
    };

    if schema.schema_id.trim().is_empty() {
        err("schema_id", "schema id must not be empty".into());
    }

    let mut artifact_names = BTreeMap::<&str, usize>::new();
    for t in &schema.artifact_types {
        *artifact_names.entry(t.name.as_str()).or_default() += 1;
    }
    for (name, n) in &artifact_names {
        if *n > 1 {
            err(name, format!("artifact type declared {n} times"));
        }
    }
    for t in &schema.artifact_types {
        if t.name.trim().is_empty() || t.name == WILDCARD {
            err(&t.name, "invalid artifact type name".into());
        }
        let mut seen = BTreeSet::new();
        for a in &t.attributes {
            if !seen.insert(a.name.as_str()) {
                err(
                    &t.name,
                    format!("attribute `{}` declared more than once", a.name),
                );
            }
            if let AttributeKind::EnumOf(values) = &a.kind {
                if values.is_empty() {
                    err(
                        &t.name,
                        format!("attribute `{}` has an empty enum-of list", a.name),
                    );
                }
            }
        }
    }

    let mapping: Vec<&str> = schema
        .artifact_types
        .iter()
        .filter(|t| t.is_mapping_type)
        .map(|t| t.name.as_str())
        .collect();
    if mapping.len() > 1 {
        err(
            &mapping.join(","),
            format!("{} artifact types flagged as mapping type", mapping.len()),
        );
    }

    let mut link_names = BTreeMap::<&str, usize>::new();
    for l in &schema.link_types {
        *link_names.entry(l.name.as_str()).or_default() += 1;
    }
    for (name, n) in &link_names {
        if *n > 1 {
            err(name, format!("link type declared {n} times"));
        }
    }
    for l in &schema.link_types {
        if l.name.trim().is_empty() {
            err(&l.name, "invalid link type name".into());
        }
        for (side, types) in [("source", &l.source_types), ("target", &l.target_types)] {
            if types.is_empty() {
                err(&l.name, format!("{side} type set is empty"));
            }
            for ty in types {
                if ty == WILDCARD {
                    if !l.is_generic() {
                        err(
                            &l.name,
                            format!("{side} wildcard only allowed on generic hyperlinks"),
                        );
                    }
                } else if !artifact_names.contains_key(ty.as_str()) {
                    err(
                        &l.name,
                        format!("{side} type `{ty}` is not a declared artifact type"),
                    );
                }
            }
        }
        if l.mediation == Mediation::Mapped && mapping.is_empty() {
            err(
                &l.name,
                "mapped mediation requires a mapping-object type".into(),
            );
        }
    }

    errors.sort();
    errors
}

/// How instance data is treated when a migration op is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstancePolicy {
    AutoEvolve,
    FlagOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum MigrationOp {
    AddArtifactType {
        def: ArtifactTypeDef,
    },
    RemoveArtifactType {
        name: String,
    },
    AddLinkType {
        def: LinkTypeDef,
    },
    RemoveLinkType {
        name: String,
    },
    RenameLinkType {
        from: String,
        to: String,
    },
    ChangeMediation {
        link_type: String,
        from: Mediation,
        to: Mediation,
    },
    ChangeArea {
        artifact_type: String,
        from: Area,
        to: Area,
    },
    ChangeAttributes {
        artifact_type: String,
        attributes: Vec<AttributeDef>,
    },
}

impl MigrationOp {
    pub fn kind(&self) -> &'static str {
        match self {
            MigrationOp::AddArtifactType { .. } => "add-artifact-type",
            MigrationOp::RemoveArtifactType { .. } => "remove-artifact-type",
            MigrationOp::AddLinkType { .. } => "add-link-type",
            MigrationOp::RemoveLinkType { .. } => "remove-link-type",
            MigrationOp::RenameLinkType { .. } => "rename-link-type",
            MigrationOp::ChangeMediation { .. } => "change-mediation",
            MigrationOp::ChangeArea { .. } => "change-area",
            MigrationOp::ChangeAttributes { .. } => "change-attributes",
        }
    }

    fn default_policy(&self) -> InstancePolicy {
        match self {
            MigrationOp::RemoveArtifactType { .. }
            | MigrationOp::RemoveLinkType { .. }
            | MigrationOp::ChangeAttributes { .. } => InstancePolicy::FlagOnly,
            _ => InstancePolicy::AutoEvolve,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    #[serde(flatten)]
    pub op: MigrationOp,
    pub instance_policy: InstancePolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimMigrationPlan {
    pub schema_id: String,
    pub from_version: u64,
    pub to_version: u64,
    pub steps: Vec<PlanStep>,
}

impl TimMigrationPlan {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn ops(&self) -> impl Iterator<Item = &MigrationOp> {
        self.steps.iter().map(|s| &s.op)
    }
}

/// Computes the ordered migration plan turning `old` into `new`.
///
/// Steps are emitted in a fixed phase order (removals and renames of link
/// types, then artifact type edits, then link type additions and mediation
/// changes); within a phase they are sorted by type name.
pub fn diff_tim(old: &TimSchema, new: &TimSchema) -> Result<TimMigrationPlan> {
    if old.schema_id != new.schema_id {
        return Err(Error::IncomparableSchemas(
            old.schema_id.clone(),
            new.schema_id.clone(),
        ));
    }

    let old_art: BTreeMap<&str, &ArtifactTypeDef> = old
        .artifact_types
        .iter()
        .map(|t| (t.name.as_str(), t))
        .collect();
    let new_art: BTreeMap<&str, &ArtifactTypeDef> = new
        .artifact_types
        .iter()
        .map(|t| (t.name.as_str(), t))
        .collect();
    let old_link: BTreeMap<&str, &LinkTypeDef> =
        old.link_types.iter().map(|t| (t.name.as_str(), t)).collect();
    let new_link: BTreeMap<&str, &LinkTypeDef> =
        new.link_types.iter().map(|t| (t.name.as_str(), t)).collect();

    let mut remove_links = Vec::new();
    let mut renames = Vec::new();
    let mut add_links = Vec::new();
    let mut mediation = Vec::new();

    let removed: Vec<&LinkTypeDef> = old_link
        .iter()
        .filter(|(n, _)| !new_link.contains_key(*n))
        .map(|(_, d)| *d)
        .collect();
    let mut added: Vec<&LinkTypeDef> = new_link
        .iter()
        .filter(|(n, _)| !old_link.contains_key(*n))
        .map(|(_, d)| *d)
        .collect();

    for r in removed {
        if let Some(pos) = added.iter().position(|a| a.same_shape(r)) {
            let a = added.remove(pos);
            renames.push(MigrationOp::RenameLinkType {
                from: r.name.clone(),
                to: a.name.clone(),
            });
        } else {
            remove_links.push(MigrationOp::RemoveLinkType {
                name: r.name.clone(),
            });
        }
    }
    for a in added {
        add_links.push(MigrationOp::AddLinkType { def: a.clone() });
    }
    for (name, o) in &old_link {
        let Some(n) = new_link.get(name) else { continue };
        if o == n {
            continue;
        }
        let mut with_new_mediation = (*o).clone();
        with_new_mediation.mediation = n.mediation;
        if &with_new_mediation == *n {
            mediation.push(MigrationOp::ChangeMediation {
                link_type: name.to_string(),
                from: o.mediation,
                to: n.mediation,
            });
        } else {
            remove_links.push(MigrationOp::RemoveLinkType {
                name: name.to_string(),
            });
            add_links.push(MigrationOp::AddLinkType { def: (*n).clone() });
        }
    }

    let mut remove_art = Vec::new();
    let mut add_art = Vec::new();
    let mut areas = Vec::new();
    let mut attrs = Vec::new();
    for (name, o) in &old_art {
        match new_art.get(name) {
            None => remove_art.push(MigrationOp::RemoveArtifactType {
                name: name.to_string(),
            }),
            Some(n) if o.is_mapping_type != n.is_mapping_type => {
                remove_art.push(MigrationOp::RemoveArtifactType {
                    name: name.to_string(),
                });
                add_art.push(MigrationOp::AddArtifactType { def: (*n).clone() });
            }
            Some(n) => {
                if o.area != n.area {
                    areas.push(MigrationOp::ChangeArea {
                        artifact_type: name.to_string(),
                        from: o.area,
                        to: n.area,
                    });
                }
                if o.attributes != n.attributes {
                    attrs.push(MigrationOp::ChangeAttributes {
                        artifact_type: name.to_string(),
                        attributes: n.attributes.clone(),
                    });
                }
            }
        }
    }
    for (name, n) in &new_art {
        if !old_art.contains_key(name) {
            add_art.push(MigrationOp::AddArtifactType { def: (*n).clone() });
        }
    }

    let by_name = |op: &MigrationOp| -> String {
        match op {
            MigrationOp::AddArtifactType { def } => def.name.clone(),
            MigrationOp::AddLinkType { def } => def.name.clone(),
            MigrationOp::RemoveArtifactType { name } | MigrationOp::RemoveLinkType { name } => {
                name.clone()
            }
            MigrationOp::RenameLinkType { from, .. } => from.clone(),
            MigrationOp::ChangeMediation { link_type, .. } => link_type.clone(),
            MigrationOp::ChangeArea { artifact_type, .. }
            | MigrationOp::ChangeAttributes { artifact_type, .. } => artifact_type.clone(),
        }
    };

    let mut steps = Vec::new();
    for mut group in [
        remove_links,
        renames,
        remove_art,
        add_art,
        areas,
        attrs,
        add_links,
        mediation,
    ] {
        group.sort_by_key(by_name);
        steps.extend(group.into_iter().map(|op| PlanStep {
            instance_policy: op.default_policy(),
            op,
        }));
    }

    Ok(TimMigrationPlan {
        schema_id: old.schema_id.clone(),
        from_version: old.schema_version,
        to_version: if steps.is_empty() {
            old.schema_version
        } else {
            new.schema_version
        },
        steps,
    })
}

/// Applies the schema effect of a plan to `schema`, returning the new schema
/// in canonical order. Instance data is not touched.
pub fn apply_schema_ops(schema: &TimSchema, plan: &TimMigrationPlan) -> Result<TimSchema> {
    let mismatch = |m: String| Error::PlanSchemaMismatch(m);
    if plan.schema_id != schema.schema_id {
        return Err(mismatch(format!(
            "plan targets schema `{}`, active schema is `{}`",
            plan.schema_id, schema.schema_id
        )));
    }
    if plan.from_version != schema.schema_version {
        return Err(mismatch(format!(
            "plan starts from version {}, active schema is at version {}",
            plan.from_version, schema.schema_version
        )));
    }

    let mut art: BTreeMap<String, ArtifactTypeDef> = schema
        .artifact_types
        .iter()
        .map(|t| (t.name.clone(), t.clone()))
        .collect();
    let mut links: BTreeMap<String, LinkTypeDef> = schema
        .link_types
        .iter()
        .map(|t| (t.name.clone(), t.clone()))
        .collect();

    for op in plan.ops() {
        match op {
            MigrationOp::AddArtifactType { def } => {
                if art.insert(def.name.clone(), def.clone()).is_some() {
                    return Err(mismatch(format!(
                        "artifact type `{}` already exists",
                        def.name
                    )));
                }
            }
            MigrationOp::RemoveArtifactType { name } => {
                art.remove(name)
                    .ok_or_else(|| mismatch(format!("no artifact type `{name}` to remove")))?;
            }
            MigrationOp::AddLinkType { def } => {
                if links.insert(def.name.clone(), def.clone()).is_some() {
                    return Err(mismatch(format!("link type `{}` already exists", def.name)));
                }
            }
            MigrationOp::RemoveLinkType { name } => {
                links
                    .remove(name)
                    .ok_or_else(|| mismatch(format!("no link type `{name}` to remove")))?;
            }
            MigrationOp::RenameLinkType { from, to } => {
                let mut def = links
                    .remove(from)
                    .ok_or_else(|| mismatch(format!("no link type `{from}` to rename")))?;
                if links.contains_key(to) {
                    return Err(mismatch(format!("link type `{to}` already exists")));
                }
                def.name = to.clone();
                links.insert(to.clone(), def);
            }
            MigrationOp::ChangeMediation {
                link_type,
                from,
                to,
            } => {
                let def = links
                    .get_mut(link_type)
                    .ok_or_else(|| mismatch(format!("no link type `{link_type}`")))?;
                if def.mediation != *from {
                    return Err(mismatch(format!(
                        "link type `{link_type}` is not {from:?}-mediated"
                    )));
                }
                def.mediation = *to;
            }
            MigrationOp::ChangeArea {
                artifact_type,
                from,
                to,
            } => {
                let def = art
                    .get_mut(artifact_type)
                    .ok_or_else(|| mismatch(format!("no artifact type `{artifact_type}`")))?;
                if def.area != *from {
                    return Err(mismatch(format!(
                        "artifact type `{artifact_type}` is not in area {from:?}"
                    )));
                }
                def.area = *to;
            }
            MigrationOp::ChangeAttributes {
                artifact_type,
                attributes,
            } => {
                let def = art
                    .get_mut(artifact_type)
                    .ok_or_else(|| mismatch(format!("no artifact type `{artifact_type}`")))?;
                def.attributes = attributes.clone();
            }
        }
    }

    Ok(TimSchema {
        schema_id: schema.schema_id.clone(),
        schema_version: plan.to_version,
        artifact_types: art.into_values().collect(),
        link_types: links.into_values().collect(),
    })
}
