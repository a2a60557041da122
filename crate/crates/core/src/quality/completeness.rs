use std::collections::BTreeSet;

use serde::Deserialize;

use crate::ids::ArtifactId;

use super::{Ctx, Detected, Detection, Rational};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExternalCoverageParams {
    pub external_type: String,
    pub traced_from: String,
    pub link_types: Vec<String>,
    pub metric: String,
}

impl Default for ExternalCoverageParams {
    fn default() -> Self {
        ExternalCoverageParams {
            external_type: "ExternalRequirement".into(),
            traced_from: "FunctionalRequirement".into(),
            link_types: vec!["satisfies".into()],
            metric: "external_req_coverage".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalUsageParams {
    pub signal_type: String,
    pub component_type: String,
    pub producer_link: String,
    pub consumer_link: String,
}

impl Default for SignalUsageParams {
    fn default() -> Self {
        SignalUsageParams {
            signal_type: "Signal".into(),
            component_type: "Component".into(),
            producer_link: "produces".into(),
            consumer_link: "consumes".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SafetyAnalysisParams {
    pub function_type: String,
    pub analysis_types: Vec<String>,
}

impl Default for SafetyAnalysisParams {
    fn default() -> Self {
        SafetyAnalysisParams {
            function_type: "Function".into(),
            analysis_types: vec!["Hazard".into()],
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryOwnerParams {}

fn type_of<'a>(ctx: &'a Ctx, id: &ArtifactId) -> Option<&'a str> {
    ctx.repo
        .artifact(id)
        .filter(|a| a.is_live())
        .map(|a| a.type_name.as_str())
}

/// Each external requirement must be related to at least one artifact of
/// the `traced_from` type through one of `link_types`, in either direction.
pub(super) fn external_coverage(ctx: &Ctx, p: &ExternalCoverageParams) -> Detection {
    let mut d = Detection::default();
    let externals: Vec<&ArtifactId> = ctx
        .repo
        .artifacts()
        .filter(|a| a.type_name == p.external_type)
        .map(|a| &a.id)
        .collect();
    let mut covered: BTreeSet<ArtifactId> = BTreeSet::new();
    for lt in &p.link_types {
        let Ok(pairs) = ctx.repo.related_pairs(lt) else { continue };
        for (a, b) in pairs {
            if type_of(ctx, &a) == Some(&p.traced_from) && type_of(ctx, &b) == Some(&p.external_type) {
                covered.insert(b);
            } else if type_of(ctx, &b) == Some(&p.traced_from)
                && type_of(ctx, &a) == Some(&p.external_type)
            {
                covered.insert(a);
            }
        }
    }
    let mut traced = 0;
    for e in &externals {
        if covered.contains(*e) {
            traced += 1;
        } else {
            d.findings.push(Detected::new(
                vec![e.0.clone()],
                format!("{e} is not traced to any {}", p.traced_from),
            ));
        }
    }
    if externals.is_empty() {
        d.notices
            .push(format!("no {} artifacts; coverage counts as complete", p.external_type));
    }
    d.metrics
        .push((p.metric.clone(), Rational::coverage(traced, externals.len())));
    d
}

/// Each signal needs a producing and a consuming component.
pub(super) fn signal_usage(ctx: &Ctx, p: &SignalUsageParams) -> Detection {
    let mut d = Detection::default();
    let repo = ctx.repo;
    let users = |lt: &str| -> BTreeSet<ArtifactId> {
        let Ok(pairs) = repo.related_pairs(lt) else {
            return BTreeSet::new();
        };
        pairs
            .into_iter()
            .filter(|(c, s)| {
                type_of(ctx, c) == Some(&p.component_type) && type_of(ctx, s) == Some(&p.signal_type)
            })
            .map(|(_, s)| s)
            .collect()
    };
    let produced = users(&p.producer_link);
    let consumed = users(&p.consumer_link);
    let mut total = 0;
    let mut ok = 0;
    for s in repo.artifacts().filter(|a| a.type_name == p.signal_type) {
        total += 1;
        let missing: Vec<&str> = [
            (!produced.contains(&s.id)).then_some("producer"),
            (!consumed.contains(&s.id)).then_some("consumer"),
        ]
        .into_iter()
        .flatten()
        .collect();
        if missing.is_empty() {
            ok += 1;
        } else {
            d.findings.push(Detected::new(
                vec![s.id.0.clone()],
                format!("{} has no {} {}", s.id, p.component_type, missing.join(" or ")),
            ));
        }
    }
    if total == 0 {
        d.notices.push(format!("no {} artifacts; usage counts as complete", p.signal_type));
    }
    d.metrics.push(("signal_usage".into(), Rational::coverage(ok, total)));
    d
}

/// Each function must be linked (directly or through one mapping object)
/// to an artifact of one of the analysis types.
pub(super) fn safety_analysis(ctx: &Ctx, p: &SafetyAnalysisParams) -> Detection {
    let mut d = Detection::default();
    let repo = ctx.repo;
    let mut total = 0;
    let mut ok = 0;
    for f in repo.artifacts().filter(|a| a.type_name == p.function_type) {
        total += 1;
        let analysed = repo
            .neighbors(&f.id)
            .iter()
            .any(|n| type_of(ctx, n).is_some_and(|t| p.analysis_types.iter().any(|x| x == t)));
        if analysed {
            ok += 1;
        } else {
            d.findings.push(Detected::new(
                vec![f.id.0.clone()],
                format!("{} has no safety analysis ({})", f.id, p.analysis_types.join(", ")),
            ));
        }
    }
    if total == 0 {
        d.notices.push(format!("no {} artifacts; analysis counts as complete", p.function_type));
    }
    d.metrics
        .push(("safety_analysis_coverage".into(), Rational::coverage(ok, total)));
    d
}

/// Each boundary object must have a responsible owner.
pub(super) fn boundary_owner(ctx: &Ctx, _: &BoundaryOwnerParams) -> Detection {
    let mut d = Detection::default();
    for a in ctx.repo.artifacts().filter(|a| a.scope.is_boundary()) {
        if a.ownership.is_none() {
            d.findings.push(Detected::new(
                vec![a.id.0.clone()],
                format!("boundary object {} has no responsible owner", a.id),
            ));
        }
    }
    d
}
