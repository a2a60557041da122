use std::collections::{BTreeMap, BTreeSet};

use crate::ids::{ArtifactId, LinkId};
use crate::repo::Repository;
use crate::versioning::Baseline;

use super::{Ctx, Detected, Detection};

/// Artifacts referenced at two or more versions by the links of `baseline`,
/// with the referenced versions and the referencing links.
pub fn version_conflicts(
    repo: &Repository,
    baseline: &Baseline,
) -> BTreeMap<ArtifactId, (BTreeSet<u32>, BTreeSet<LinkId>)> {
    let mut refs: BTreeMap<ArtifactId, (BTreeSet<u32>, BTreeSet<LinkId>)> = BTreeMap::new();
    for (lid, &v) in &baseline.link_versions {
        let Some(link) = repo.link(lid) else { continue };
        let pins = if link.version == v {
            link.endpoint_versions.clone()
        } else {
            match link.at_version(v) {
                Some(old) => old.endpoint_versions,
                None => continue,
            }
        };
        for (a, av) in pins {
            let e = refs.entry(a).or_default();
            e.0.insert(av);
            e.1.insert(lid.clone());
        }
    }
    refs.retain(|_, (vs, _)| vs.len() > 1);
    refs
}

pub(super) fn baseline_versions(ctx: &Ctx) -> Detection {
    let mut d = Detection::default();
    for (a, (versions, links)) in version_conflicts(ctx.repo, ctx.baseline) {
        let vs: Vec<String> = versions.iter().map(|v| format!("v{v}")).collect();
        let mut subjects = vec![a.0.clone()];
        subjects.extend(links.iter().map(|l| l.0.clone()));
        d.findings.push(Detected::new(
            subjects,
            format!("{a} is referenced at {} within baseline {}", vs.join(", "), ctx.baseline.id),
        ));
    }
    d
}

/// Live links that pin a boundary object at an outdated version.
pub(super) fn stale_boundary_links(ctx: &Ctx) -> Detection {
    let mut d = Detection::default();
    let repo = ctx.repo;
    for l in repo.links() {
        for (a, &pinned) in &l.endpoint_versions {
            let Some(art) = repo.artifact(a) else { continue };
            if art.scope.is_boundary() && pinned < art.version {
                d.findings.push(Detected::new(
                    vec![l.id.0.clone(), a.0.clone()],
                    format!("{} pins boundary object {a} at v{pinned}; head is v{}", l.id, art.version),
                ));
            }
        }
    }
    d
}
