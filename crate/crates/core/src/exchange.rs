//! ReqIF subset import and export.
//!
//! Supported subset:
//!
//! ```text
//! REQ-IF
//!   THE-HEADER/REQ-IF-HEADER IDENTIFIER=..
//!     CREATION-TIME (text)
//!   CORE-CONTENT/REQ-IF-CONTENT
//!     SPEC-OBJECTS/SPEC-OBJECT IDENTIFIER=.. LAST-CHANGE=.. LONG-NAME=..
//!       VALUES/ATTRIBUTE-VALUE-STRING THE-VALUE=..   (exactly one)
//!     SPEC-RELATIONS/SPEC-RELATION IDENTIFIER=..
//!       SOURCE/SPEC-OBJECT-REF (text)
//!       TARGET/SPEC-OBJECT-REF (text)
//!       TYPE (text: link type name)
//! ```
//!
//! Any other element is skipped and reported as a [`ReqIfWarning`].
//! Namespace prefixes are ignored.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Cursor;

use quick_xml::events::{BytesDecl, BytesEnd, BytesStart, BytesText, Event};
use quick_xml::{Reader, Writer};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ids::{ArtifactId, LinkId, Timestamp};
use crate::journal::OpKind;
use crate::model::{AttrValue, Attributes, Scope, Status, TraceLink};
use crate::org;
use crate::repo::{ChangeSet, Pending, Repository};
use crate::select::Selector;
use crate::tim::Mediation;

pub const EXTERNAL_TYPE: &str = "ExternalRequirement";
pub const EXTERNAL_ID: &str = "external_id";
pub const TEXT: &str = "text";
pub const LAST_CHANGE: &str = "last_change";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReqIfHeader {
    pub identifier: String,
    pub creation_time: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpecObject {
    pub identifier: String,
    pub last_change: String,
    pub long_name: String,
    pub text_value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpecRelation {
    pub identifier: String,
    pub source_ref: String,
    pub target_ref: String,
    pub type_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReqIfDocument {
    pub header: ReqIfHeader,
    pub spec_objects: Vec<SpecObject>,
    pub spec_relations: Vec<SpecRelation>,
}

/// A skipped element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReqIfWarning {
    pub line: usize,
    pub element: String,
    pub message: String,
}

#[derive(Debug)]
struct Node {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Node>,
    text: String,
    line: usize,
}

impl Node {
    fn attr(&self, key: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn required_attr(&self, key: &str) -> Result<String> {
        self.attr(key)
            .map(str::to_string)
            .ok_or_else(|| self.error(format!("missing attribute {key}")))
    }

    fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Node> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    /// The single child called `name`.
    fn one<'a>(&'a self, name: &'a str) -> Result<&'a Node> {
        let mut it = self.children_named(name);
        match (it.next(), it.next()) {
            (Some(n), None) => Ok(n),
            (None, _) => Err(self.error(format!("missing element {name}"))),
            (Some(_), Some(dup)) => Err(dup.error(format!("duplicate element {name}"))),
        }
    }

    fn optional<'a>(&'a self, name: &'a str) -> Result<Option<&'a Node>> {
        match self.children_named(name).count() {
            0 => Ok(None),
            _ => self.one(name).map(Some),
        }
    }

    fn text(&self) -> Result<String> {
        let t = self.text.trim();
        if t.is_empty() {
            return Err(self.error("empty text".to_string()));
        }
        Ok(t.to_string())
    }

    fn error(&self, message: String) -> Error {
        Error::ParseError {
            line: self.line,
            element: self.name.clone(),
            message,
        }
    }

    /// Warns about every child not in `known`.
    fn skip_unknown(&self, known: &[&str], warnings: &mut Vec<ReqIfWarning>) {
        for c in &self.children {
            if !known.contains(&c.name.as_str()) {
                warnings.push(ReqIfWarning {
                    line: c.line,
                    element: c.name.clone(),
                    message: format!("unsupported element inside {} skipped", self.name),
                });
            }
        }
    }
}

fn local_name(qname: &[u8]) -> String {
    let s = String::from_utf8_lossy(qname);
    match s.rsplit_once(':') {
        Some((_, local)) => local.to_string(),
        None => s.into_owned(),
    }
}

fn line_at(text: &str, offset: usize) -> usize {
    // leading whitespace belongs to the previous event when trimming
    let offset = offset.min(text.len());
    let end = text.len() - text[offset..].trim_start().len();
    text.as_bytes()[..end].iter().filter(|&&b| b == b'\n').count() + 1
}

fn xml_error(text: &str, offset: usize, element: &str, message: impl ToString) -> Error {
    Error::ParseError {
        line: line_at(text, offset),
        element: element.to_string(),
        message: message.to_string(),
    }
}

fn open_node(text: &str, offset: usize, e: &BytesStart) -> Result<Node> {
    let name = local_name(e.name().as_ref());
    let mut attrs = Vec::new();
    for a in e.attributes() {
        let a = a.map_err(|err| xml_error(text, offset, &name, err))?;
        let value = a
            .unescape_value()
            .map_err(|err| xml_error(text, offset, &name, err))?;
        attrs.push((local_name(a.key.as_ref()), value.into_owned()));
    }
    Ok(Node {
        name,
        attrs,
        children: Vec::new(),
        text: String::new(),
        line: line_at(text, offset),
    })
}

fn parse_tree(text: &str) -> Result<Node> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);
    let mut stack: Vec<Node> = Vec::new();
    let mut root: Option<Node> = None;
    loop {
        let offset = reader.buffer_position() as usize;
        let current = stack.last().map_or("document", |n| n.name.as_str()).to_string();
        let event = reader
            .read_event()
            .map_err(|e| xml_error(text, reader.buffer_position() as usize, &current, e))?;
        match event {
            Event::Start(e) => stack.push(open_node(text, offset, &e)?),
            Event::Empty(e) => {
                let node = open_node(text, offset, &e)?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(node),
                    None if root.is_none() => root = Some(node),
                    None => return Err(xml_error(text, offset, &node.name, "second root element")),
                }
            }
            Event::End(_) => {
                let node = stack.pop().expect("reader checks end tags");
                match stack.last_mut() {
                    Some(parent) => parent.children.push(node),
                    None if root.is_none() => root = Some(node),
                    None => return Err(xml_error(text, offset, &node.name, "second root element")),
                }
            }
            Event::Text(t) => {
                let s = t.unescape().map_err(|e| xml_error(text, offset, &current, e))?;
                match stack.last_mut() {
                    Some(n) => n.text.push_str(&s),
                    None => return Err(xml_error(text, offset, "document", "text outside the root element")),
                }
            }
            Event::CData(c) => {
                if let Some(n) = stack.last_mut() {
                    n.text.push_str(&String::from_utf8_lossy(&c));
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if let Some(open) = stack.last() {
        return Err(open.error("element is not closed".to_string()));
    }
    root.ok_or_else(|| xml_error(text, text.len(), "document", "no root element"))
}

/// Parses a subset document, returning it with warnings for skipped elements.
pub fn parse_reqif(text: &str) -> Result<(ReqIfDocument, Vec<ReqIfWarning>)> {
    let root = parse_tree(text)?;
    if root.name != "REQ-IF" {
        return Err(root.error("root element must be REQ-IF".to_string()));
    }
    let mut warnings = Vec::new();
    root.skip_unknown(&["THE-HEADER", "CORE-CONTENT", "TOOL-EXTENSIONS"], &mut warnings);

    let the_header = root.one("THE-HEADER")?;
    the_header.skip_unknown(&["REQ-IF-HEADER"], &mut warnings);
    let h = the_header.one("REQ-IF-HEADER")?;
    h.skip_unknown(&["CREATION-TIME"], &mut warnings);
    let header = ReqIfHeader {
        identifier: h.required_attr("IDENTIFIER")?,
        creation_time: h.one("CREATION-TIME")?.text()?,
    };

    let core = root.one("CORE-CONTENT")?;
    core.skip_unknown(&["REQ-IF-CONTENT"], &mut warnings);
    let content = core.one("REQ-IF-CONTENT")?;
    content.skip_unknown(&["SPEC-OBJECTS", "SPEC-RELATIONS"], &mut warnings);

    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut unique = |n: &Node, id: &str| -> Result<()> {
        if let Some(first) = seen.insert(id.to_string(), n.line) {
            return Err(n.error(format!("identifier {id} already used on line {first}")));
        }
        Ok(())
    };

    let mut spec_objects = Vec::new();
    if let Some(objs) = content.optional("SPEC-OBJECTS")? {
        objs.skip_unknown(&["SPEC-OBJECT"], &mut warnings);
        for o in objs.children_named("SPEC-OBJECT") {
            o.skip_unknown(&["VALUES", "TYPE"], &mut warnings);
            let identifier = o.required_attr("IDENTIFIER")?;
            unique(o, &identifier)?;
            let values = o.one("VALUES")?;
            values.skip_unknown(&["ATTRIBUTE-VALUE-STRING"], &mut warnings);
            let value = values.one("ATTRIBUTE-VALUE-STRING")?;
            spec_objects.push(SpecObject {
                identifier,
                last_change: o.required_attr("LAST-CHANGE")?,
                long_name: o.required_attr("LONG-NAME")?,
                text_value: value.required_attr("THE-VALUE")?,
            });
        }
    }

    let mut spec_relations = Vec::new();
    if let Some(rels) = content.optional("SPEC-RELATIONS")? {
        rels.skip_unknown(&["SPEC-RELATION"], &mut warnings);
        for r in rels.children_named("SPEC-RELATION") {
            r.skip_unknown(&["SOURCE", "TARGET", "TYPE"], &mut warnings);
            let identifier = r.required_attr("IDENTIFIER")?;
            unique(r, &identifier)?;
            let end = |side: &str| -> Result<String> { r.one(side)?.one("SPEC-OBJECT-REF")?.text() };
            spec_relations.push(SpecRelation {
                identifier,
                source_ref: end("SOURCE")?,
                target_ref: end("TARGET")?,
                type_name: r.one("TYPE")?.text()?,
            });
        }
    }

    Ok((
        ReqIfDocument {
            header,
            spec_objects,
            spec_relations,
        },
        warnings,
    ))
}

/// Serializes a document; the output parses back to an equal document.
pub fn write_reqif(doc: &ReqIfDocument) -> String {
    let mut w = Writer::new_with_indent(Cursor::new(Vec::new()), b' ', 2);
    let io = "writing to memory cannot fail";
    w.write_event(Event::Decl(BytesDecl::new("1.0", Some("UTF-8"), None)))
        .expect(io);
    let open = |w: &mut Writer<Cursor<Vec<u8>>>, tag: BytesStart| w.write_event(Event::Start(tag)).expect(io);
    let close = |w: &mut Writer<Cursor<Vec<u8>>>, name: &str| w.write_event(Event::End(BytesEnd::new(name))).expect(io);
    let leaf = |w: &mut Writer<Cursor<Vec<u8>>>, name: &str, text: &str| {
        w.create_element(name)
            .write_text_content(BytesText::new(text))
            .expect(io);
    };

    open(&mut w, BytesStart::new("REQ-IF"));
    open(&mut w, BytesStart::new("THE-HEADER"));
    open(
        &mut w,
        BytesStart::new("REQ-IF-HEADER").with_attributes([("IDENTIFIER", doc.header.identifier.as_str())]),
    );
    leaf(&mut w, "CREATION-TIME", &doc.header.creation_time);
    close(&mut w, "REQ-IF-HEADER");
    close(&mut w, "THE-HEADER");
    open(&mut w, BytesStart::new("CORE-CONTENT"));
    open(&mut w, BytesStart::new("REQ-IF-CONTENT"));

    open(&mut w, BytesStart::new("SPEC-OBJECTS"));
    for o in &doc.spec_objects {
        open(
            &mut w,
            BytesStart::new("SPEC-OBJECT").with_attributes([
                ("IDENTIFIER", o.identifier.as_str()),
                ("LAST-CHANGE", o.last_change.as_str()),
                ("LONG-NAME", o.long_name.as_str()),
            ]),
        );
        open(&mut w, BytesStart::new("VALUES"));
        w.write_event(Event::Empty(
            BytesStart::new("ATTRIBUTE-VALUE-STRING").with_attributes([("THE-VALUE", o.text_value.as_str())]),
        ))
        .expect(io);
        close(&mut w, "VALUES");
        close(&mut w, "SPEC-OBJECT");
    }
    close(&mut w, "SPEC-OBJECTS");

    open(&mut w, BytesStart::new("SPEC-RELATIONS"));
    for r in &doc.spec_relations {
        open(
            &mut w,
            BytesStart::new("SPEC-RELATION").with_attributes([("IDENTIFIER", r.identifier.as_str())]),
        );
        for (side, reference) in [("SOURCE", &r.source_ref), ("TARGET", &r.target_ref)] {
            open(&mut w, BytesStart::new(side));
            leaf(&mut w, "SPEC-OBJECT-REF", reference);
            close(&mut w, side);
        }
        leaf(&mut w, "TYPE", &r.type_name);
        close(&mut w, "SPEC-RELATION");
    }
    close(&mut w, "SPEC-RELATIONS");

    close(&mut w, "REQ-IF-CONTENT");
    close(&mut w, "CORE-CONTENT");
    close(&mut w, "REQ-IF");
    let mut out = String::from_utf8(w.into_inner().into_inner()).expect("writer emits UTF-8");
    out.push('\n');
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImportRecord {
    pub document: String,
    pub imported_at: Timestamp,
    /// Document identifier to repository artifact id.
    pub artifacts: BTreeMap<String, ArtifactId>,
    pub relations: BTreeMap<String, LinkId>,
    pub created: Vec<ArtifactId>,
    pub new_versions: Vec<ArtifactId>,
    pub updated: Vec<ArtifactId>,
    pub unchanged: Vec<ArtifactId>,
}

/// The live external artifact carrying `external_id`, if any.
pub fn find_external(repo: &Repository, external_id: &str) -> Option<ArtifactId> {
    repo.artifacts()
        .find(|a| a.scope == Scope::External && a.attr_text(EXTERNAL_ID) == Some(external_id))
        .map(|a| a.id.clone())
}

fn find_relation<'a>(repo: &'a Repository, identifier: &str) -> Option<&'a TraceLink> {
    repo.links().find(|l| {
        l.attributes.get(EXTERNAL_ID).and_then(AttrValue::as_text) == Some(identifier)
            && l.endpoints()
                .any(|e| repo.artifact(e).is_some_and(|a| a.scope == Scope::External))
    })
}

/// Imports (or re-imports) a document in one commit.
///
/// Spec objects become released external artifacts matched by external
/// identifier; a changed text yields a new version, other field changes
/// are applied in place. Relations become links keyed by their identifier;
/// endpoints resolve to document identifiers first, then repository ids.
pub fn import_reqif(repo: &mut Repository, cs: &ChangeSet, doc: &ReqIfDocument) -> Result<ImportRecord> {
    repo.require_actor(cs)?;
    let def = repo
        .tim()
        .artifact_type(EXTERNAL_TYPE)
        .cloned()
        .ok_or_else(|| Error::UnknownType(EXTERNAL_TYPE.to_string()))?;
    let now = repo.now();
    let mut alloc = repo.allocator();
    let mut record = ImportRecord {
        document: doc.header.identifier.clone(),
        imported_at: now,
        artifacts: BTreeMap::new(),
        relations: BTreeMap::new(),
        created: vec![],
        new_versions: vec![],
        updated: vec![],
        unchanged: vec![],
    };
    let mut pending = Vec::new();
    // post-import artifacts, for endpoint typing and version pins
    let mut staged: BTreeMap<ArtifactId, crate::model::Artifact> = BTreeMap::new();

    for o in &doc.spec_objects {
        let attrs: Attributes = [
            (EXTERNAL_ID.to_string(), AttrValue::Text(o.identifier.clone())),
            (TEXT.to_string(), AttrValue::Text(o.text_value.clone())),
            (LAST_CHANGE.to_string(), AttrValue::Text(o.last_change.clone())),
        ]
        .into();
        match find_external(repo, &o.identifier) {
            None => {
                let id = alloc.artifact();
                Repository::check_attributes(&def, id.as_str(), &attrs)?;
                let mut a = repo.build_artifact(cs, id.clone(), &def, &o.long_name, attrs);
                a.status = Status::Released;
                record.created.push(id.clone());
                record.artifacts.insert(o.identifier.clone(), id.clone());
                pending.push(Pending::artifact(OpKind::Create, &a));
                staged.insert(id, a);
            }
            Some(id) => {
                let old = repo.live_artifact(&id)?;
                record.artifacts.insert(o.identifier.clone(), id.clone());
                if old.title == o.long_name && old.attributes == attrs {
                    record.unchanged.push(id);
                    continue;
                }
                let text_changed = old.attr_text(TEXT) != Some(o.text_value.as_str());
                let bump = text_changed || repo.frozen_in(id.as_str(), old.version).is_some();
                let mut a = old.without_history();
                a.title = o.long_name.clone();
                a.attributes = attrs;
                a.status = Status::Released;
                a.changed_by = cs.actor.clone();
                a.changed_at = now;
                let op = if bump {
                    a.version += 1;
                    record.new_versions.push(id.clone());
                    OpKind::VersionBump
                } else {
                    record.updated.push(id.clone());
                    OpKind::Update
                };
                pending.push(Pending::artifact(op, &a));
                staged.insert(id, a);
            }
        }
    }

    let resolve = |reference: &str, relation: &str| -> Result<ArtifactId> {
        if let Some(id) = record.artifacts.get(reference) {
            return Ok(id.clone());
        }
        let id = ArtifactId::new(reference);
        match repo.artifact(&id) {
            Some(a) if a.is_live() => Ok(id),
            _ => Err(Error::UnresolvedRelationRef {
                relation: relation.to_string(),
                reference: reference.to_string(),
            }),
        }
    };
    let mut links = Vec::new();
    for r in &doc.spec_relations {
        let s = resolve(&r.source_ref, &r.identifier)?;
        let t = resolve(&r.target_ref, &r.identifier)?;
        let lt = repo
            .tim()
            .link_type(&r.type_name)
            .ok_or_else(|| Error::UnknownLinkType(r.type_name.clone()))?;
        if lt.mediation == Mediation::Mapped && !lt.is_generic() {
            return Err(Error::MappedLinkType(r.type_name.clone()));
        }
        links.push((r, s, t));
    }

    let version_of = |id: &ArtifactId| -> u32 {
        staged
            .get(id)
            .or_else(|| repo.artifact(id))
            .map_or(1, |a| a.version)
    };
    for (r, s, t) in links {
        let existing = find_relation(repo, &r.identifier);
        if let Some(l) = existing {
            if l.link_type == r.type_name && l.sources == [s.clone()] && l.targets == [t.clone()] {
                record.relations.insert(r.identifier.clone(), l.id.clone());
                continue;
            }
            let mut old = l.without_history();
            old.deleted = true;
            old.changed_by = cs.actor.clone();
            old.changed_at = now;
            pending.push(Pending::link(OpKind::Delete, &old));
        }
        let id = alloc.link();
        let link = TraceLink {
            id: id.clone(),
            link_type: r.type_name.clone(),
            endpoint_versions: [(s.clone(), version_of(&s)), (t.clone(), version_of(&t))].into(),
            sources: vec![s],
            targets: vec![t],
            attributes: [(EXTERNAL_ID.to_string(), AttrValue::Text(r.identifier.clone()))].into(),
            status: Status::Released,
            version: 1,
            // any relation touching an imported artifact crosses the company border
            rigidity_group: crate::model::RigidityGroup::G1CrossCompany,
            mapping_role: None,
            created_by: cs.actor.clone(),
            created_at: now,
            changed_by: cs.actor.clone(),
            changed_at: now,
            deleted: false,
            history: vec![],
        };
        record.relations.insert(r.identifier.clone(), id);
        pending.push(Pending::link(OpKind::Create, &link));
    }
    repo.commit(cs, pending);
    // relations between two non-external artifacts are not cross-company
    let fix: Vec<TraceLink> = record
        .relations
        .values()
        .filter_map(|id| repo.link(id))
        .filter(|l| l.is_live())
        .filter_map(|l| {
            let g = org::classify_rigidity(repo, l).ok()?;
            (g != l.rigidity_group).then(|| {
                let mut l = l.without_history();
                l.rigidity_group = g;
                l
            })
        })
        .collect();
    if !fix.is_empty() {
        let pending = fix.iter().map(|l| Pending::link(OpKind::Update, l)).collect();
        repo.commit(cs, pending);
    }
    Ok(record)
}

/// Exports the selected artifacts and the direct links among them, ordered
/// by artifact and link id. Imported artifacts keep their external
/// identifier; others use their repository id.
pub fn export_reqif(
    repo: &Repository,
    selector: &Selector,
    identifier: &str,
    creation_time: &str,
) -> Result<ReqIfDocument> {
    let selected = selector.select(repo);
    if selected.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut doc_id: BTreeMap<&ArtifactId, String> = BTreeMap::new();
    let mut spec_objects = Vec::new();
    for id in &selected {
        let a = repo.live_artifact(id)?;
        let identifier = a.attr_text(EXTERNAL_ID).unwrap_or(id.as_str()).to_string();
        doc_id.insert(id, identifier.clone());
        spec_objects.push(SpecObject {
            identifier,
            last_change: a
                .attr_text(LAST_CHANGE)
                .map(str::to_string)
                .unwrap_or_else(|| a.changed_at.to_rfc3339()),
            long_name: a.title.clone(),
            text_value: a.attr_text(TEXT).unwrap_or(&a.title).to_string(),
        });
    }
    let chosen: BTreeSet<&ArtifactId> = selected.iter().collect();
    let mut spec_relations = Vec::new();
    for l in repo.links() {
        if l.mapping_role.is_some() || !l.endpoints().all(|e| chosen.contains(e)) {
            continue;
        }
        let base = l
            .attributes
            .get(EXTERNAL_ID)
            .and_then(AttrValue::as_text)
            .unwrap_or(l.id.as_str());
        let pairs: Vec<(&ArtifactId, &ArtifactId)> = l
            .sources
            .iter()
            .flat_map(|s| l.targets.iter().map(move |t| (s, t)))
            .collect();
        let single = pairs.len() == 1;
        for (i, (s, t)) in pairs.into_iter().enumerate() {
            spec_relations.push(SpecRelation {
                identifier: if single { base.to_string() } else { format!("{base}-{}", i + 1) },
                source_ref: doc_id[s].clone(),
                target_ref: doc_id[t].clone(),
                type_name: l.link_type.clone(),
            });
        }
    }
    Ok(ReqIfDocument {
        header: ReqIfHeader {
            identifier: identifier.to_string(),
            creation_time: creation_time.to_string(),
        },
        spec_objects,
        spec_relations,
    })
}
