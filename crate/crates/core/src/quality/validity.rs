use crate::model::MappingRole;
use crate::tim::Mediation;

use super::{Ctx, Detected, Detection};

/// One finding per violated rule per artifact.
pub(super) fn artifacts(ctx: &Ctx) -> Detection {
    let mut d = Detection::default();
    let tim = ctx.repo.tim();
    for a in ctx.repo.artifacts() {
        let id = a.id.0.clone();
        let Some(def) = tim.artifact_type(&a.type_name) else {
            d.findings.push(Detected::new(
                vec![id],
                format!("{} has type `{}` which the schema does not declare", a.id, a.type_name),
            ));
            continue;
        };
        for attr in &def.attributes {
            match a.attributes.get(&attr.name) {
                None if attr.required => d.findings.push(Detected::new(
                    vec![id.clone()],
                    format!("{} lacks required attribute `{}`", a.id, attr.name),
                )),
                Some(v) if !v.conforms(&attr.kind) => d.findings.push(Detected::new(
                    vec![id.clone()],
                    format!("{}.{} = {v} is not {}", a.id, attr.name, attr.kind),
                )),
                _ => {}
            }
        }
    }
    d
}

/// One finding per violated rule per link: unknown type, dangling or
/// mistyped endpoints, arity and mediation.
pub(super) fn links(ctx: &Ctx) -> Detection {
    let mut d = Detection::default();
    let repo = ctx.repo;
    let tim = repo.tim();
    for l in repo.links() {
        let id = l.id.0.clone();
        let mut push = |msg: String| d.findings.push(Detected::new(vec![id.clone()], msg));
        for e in l.endpoints() {
            if repo.artifact(e).is_none_or(|a| !a.is_live()) {
                push(format!("{} has dangling endpoint {e}", l.id));
            }
        }
        let Some(def) = tim.link_type(&l.link_type) else {
            push(format!("{} has type `{}` which the schema does not declare", l.id, l.link_type));
            continue;
        };
        match (def.mediation, l.mapping_role) {
            (Mediation::Mapped, None) if !def.is_generic() => {
                push(format!("{} links `{}` directly but the type is mapped", l.id, l.link_type));
                continue;
            }
            (Mediation::Direct, Some(_)) => {
                push(format!("{} is a mapping link but `{}` is direct", l.id, l.link_type));
                continue;
            }
            _ => {}
        }
        if let Some(role) = l.mapping_role {
            // mapping object -> endpoint; check the endpoint against its side
            let mapping_ok = l.sources.len() == 1
                && repo
                    .artifact(&l.sources[0])
                    .is_some_and(|m| repo.is_mapping_object(m));
            if !mapping_ok {
                push(format!("{} has a mapping role but its source is not a mapping object", l.id));
            }
            for t in &l.targets {
                let Some(a) = repo.artifact(t) else { continue };
                let ok = match role {
                    MappingRole::Source => def.permits_source(&a.type_name),
                    MappingRole::Target => def.permits_target(&a.type_name),
                };
                if !ok {
                    push(format!(
                        "{} maps {t} of type `{}` which `{}` does not permit",
                        l.id, a.type_name, l.link_type
                    ));
                }
            }
            continue;
        }
        for (side, ids, arity) in [
            ("sources", &l.sources, def.source_arity),
            ("targets", &l.targets, def.target_arity),
        ] {
            if !arity.admits(ids.len()) {
                push(format!("{} has {} {side}; `{}` allows {}", l.id, ids.len(), l.link_type, arity.as_str()));
            }
        }
        for s in &l.sources {
            if let Some(a) = repo.artifact(s) {
                if !def.permits_source(&a.type_name) {
                    push(format!("{} source {s} of type `{}` is not permitted", l.id, a.type_name));
                }
            }
        }
        for t in &l.targets {
            if let Some(a) = repo.artifact(t) {
                if !def.permits_target(&a.type_name) {
                    push(format!("{} target {t} of type `{}` is not permitted", l.id, a.type_name));
                }
            }
        }
    }
    d
}
