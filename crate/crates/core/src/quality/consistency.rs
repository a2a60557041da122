use serde::Deserialize;

use super::{Ctx, Detected, Detection};

/// Attribute pairs that must agree between the two ends of a related pair.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrespondenceParams {
    pub link_type: String,
    /// `[source attribute, target attribute]`
    pub pairs: Vec<(String, String)>,
}

pub(super) fn correspondence(ctx: &Ctx, p: &CorrespondenceParams) -> Detection {
    let mut d = Detection::default();
    let Ok(pairs) = ctx.repo.related_pairs(&p.link_type) else {
        d.notices.push(format!("link type `{}` is not in the active schema", p.link_type));
        return d;
    };
    for (a, b) in pairs {
        if a == b {
            continue;
        }
        let (Some(sa), Some(sb)) = (ctx.repo.artifact(&a), ctx.repo.artifact(&b)) else {
            continue;
        };
        for (ka, kb) in &p.pairs {
            if let (Some(va), Some(vb)) = (sa.attributes.get(ka), sb.attributes.get(kb)) {
                if va != vb {
                    d.findings.push(Detected::new(
                        vec![a.0.clone(), b.0.clone()],
                        format!("{a}.{ka} = {va} but {b}.{kb} = {vb} across `{}`", p.link_type),
                    ));
                }
            }
        }
    }
    d
}

/// Mapping objects that relate an artifact to itself.
pub(super) fn self_mapping(ctx: &Ctx) -> Detection {
    let mut d = Detection::default();
    let repo = ctx.repo;
    let Some(mapping_type) = repo.tim().mapping_type() else {
        return d;
    };
    for m in repo.artifacts().filter(|a| a.type_name == mapping_type.name) {
        let partners = repo.mapping_partners(&m.id);
        for s in &partners.sources {
            if partners.targets.contains(s) {
                d.findings.push(Detected::new(
                    vec![m.id.0.clone(), s.0.clone()],
                    format!("mapping object {} maps {s} to itself", m.id),
                ));
            }
        }
    }
    d
}
