//! Reference schema, users, profiles and the running example.
//!
//! The schema covers safety analysis, function definition and design areas,
//! with a mapping-object type between function interfaces and signals.

use serde_json::json;

use crate::error::Result;
use crate::ids::{ArtifactId, Clock};
use crate::model::{Attributes, Scope};
use crate::org::{Role, User};
use crate::quality::{Phase, QualityProfile, RuleConfig, Severity};
use crate::repo::{ChangeSet, Repository, TypeCheck};
use crate::tim::{
    Area, Arity, ArtifactTypeDef, AttributeDef, AttributeKind, LinkSemantics, LinkTypeDef,
    Mediation, TimSchema,
};
use crate::versioning::{PolicySelector, PolicyTable, VersioningMode};

fn attr(name: &str, kind: AttributeKind, required: bool) -> AttributeDef {
    AttributeDef {
        name: name.into(),
        kind,
        required,
    }
}

fn data_type() -> AttributeDef {
    attr(
        "data_type",
        AttributeKind::EnumOf(vec!["Integer".into(), "Real".into(), "Boolean".into()]),
        false,
    )
}

fn art(name: &str, area: Area, attributes: Vec<AttributeDef>) -> ArtifactTypeDef {
    ArtifactTypeDef {
        name: name.into(),
        area,
        attributes,
        is_mapping_type: false,
    }
}

fn link(
    name: &str,
    semantics: LinkSemantics,
    sources: &[&str],
    targets: &[&str],
    mediation: Mediation,
    arity: (Arity, Arity),
) -> LinkTypeDef {
    LinkTypeDef {
        name: name.into(),
        semantics,
        source_types: sources.iter().map(|s| s.to_string()).collect(),
        target_types: targets.iter().map(|s| s.to_string()).collect(),
        mediation,
        source_arity: arity.0,
        target_arity: arity.1,
    }
}

pub fn fig1_schema() -> TimSchema {
    use Arity::{Many, One};
    use LinkSemantics as S;
    use Mediation::{Direct, Mapped};
    let mut mapping = art("MappingObject", Area::Design, vec![]);
    mapping.is_mapping_type = true;
    TimSchema {
        schema_id: "vehicle-tim".into(),
        schema_version: 1,
        artifact_types: vec![
            art("Hazard", Area::SafetyAnalysis, vec![]),
            art("HazardousEvent", Area::SafetyAnalysis, vec![]),
            art(
                "SafetyGoal",
                Area::SafetyAnalysis,
                vec![attr(
                    "ASIL",
                    AttributeKind::EnumOf(["QM", "A", "B", "C", "D"].map(String::from).to_vec()),
                    true,
                )],
            ),
            art("Function", Area::FunctionDefinition, vec![]),
            art(
                "FunctionalRequirement",
                Area::FunctionDefinition,
                vec![attr("text", AttributeKind::Text, false)],
            ),
            art("FunctionInterface", Area::FunctionDefinition, vec![data_type()]),
            mapping,
            art("Signal", Area::Design, vec![data_type()]),
            art("Component", Area::Design, vec![]),
            art("DesignNote", Area::Design, vec![]),
            art(
                "ExternalRequirement",
                Area::External,
                vec![
                    attr("external_id", AttributeKind::Text, true),
                    attr("text", AttributeKind::Text, false),
                    attr("last_change", AttributeKind::Text, false),
                ],
            ),
        ],
        link_types: vec![
            link("results-in", S::DerivesFrom, &["Hazard"], &["HazardousEvent"], Direct, (Many, Many)),
            link("mitigates", S::Mitigates, &["SafetyGoal"], &["HazardousEvent"], Direct, (Many, Many)),
            link(
                "allocated-to",
                S::Allocates,
                &["SafetyGoal"],
                &["FunctionInterface", "Function", "FunctionalRequirement"],
                Direct,
                (One, Many),
            ),
            link("realizes", S::Refines, &["FunctionInterface"], &["Signal"], Mapped, (One, One)),
            link("produces", S::Produces, &["Component"], &["Signal"], Direct, (One, Many)),
            link("consumes", S::Consumes, &["Component"], &["Signal"], Direct, (One, Many)),
            link(
                "satisfies",
                S::Satisfies,
                &["FunctionalRequirement"],
                &["ExternalRequirement"],
                Direct,
                (Many, Many),
            ),
            link("hazard-of", S::DerivesFrom, &["Hazard"], &["Function"], Direct, (Many, Many)),
            link(
                "specifies",
                S::Refines,
                &["FunctionalRequirement"],
                &["Function", "FunctionInterface"],
                Direct,
                (Many, Many),
            ),
            link("documents", S::Refines, &["DesignNote"], &["Component", "Signal"], Direct, (One, Many)),
            link("hyperlink", S::GenericHyperlink, &["*"], &["*"], Direct, (Many, Many)),
        ],
    }
}

pub fn users() -> Vec<User> {
    vec![
        User::new("sam", "Sam", &[Role::SafetyAnalyst]),
        User::new("rachel", "Rachel", &[Role::FunctionExpert]),
        User::new("anna", "Anna", &[Role::Developer]),
        User::new("ben", "Ben", &[Role::Developer]),
        User::new("mia", "Mia", &[Role::MethodsAndTools, Role::Architect]),
        User::new("cust", "Customer", &[Role::ExternalCustomer]),
    ]
}

fn correspondence() -> RuleConfig {
    RuleConfig::new("consistency.correspondence:realizes-data-type", Severity::Error)
        .param("link_type", json!("realizes"))
        .param("pairs", json!([["data_type", "data_type"]]))
}

fn with_severity(rule: RuleConfig, severity: Severity) -> RuleConfig {
    RuleConfig { severity, ..rule }
}

fn boundary_strict(default: VersioningMode) -> PolicyTable {
    PolicyTable::uniform(default).with(
        VersioningMode::Strict,
        PolicySelector::parse("scope=boundary").expect("static selector"),
    )
}

/// Prototype: everything but structural errors is advisory; safety-analysis
/// completeness is off.
pub fn prototype_profile() -> QualityProfile {
    QualityProfile {
        phase: Phase::Prototype,
        revision: 1,
        gate: Severity::Error,
        rules: vec![
            with_severity(correspondence(), Severity::Warning),
            RuleConfig::new("consistency.self-mapping", Severity::Warning),
            RuleConfig::new("version-consistency.baseline", Severity::Warning),
            RuleConfig::new("version-consistency.stale-boundary-links", Severity::Info).disabled(),
            RuleConfig::new("validity.artifacts", Severity::Warning),
            RuleConfig::new("validity.links", Severity::Warning),
            RuleConfig::new("completeness.external-coverage", Severity::Info),
            RuleConfig::new("completeness.signal-usage", Severity::Info),
            RuleConfig::new("completeness.safety-analysis", Severity::Error).disabled(),
            RuleConfig::new("completeness.boundary-owner", Severity::Info).disabled(),
        ],
        versioning: PolicyTable::uniform(VersioningMode::Loose),
        promotion: Default::default(),
        controls: Default::default(),
        change_detection: Default::default(),
    }
}

/// Development: safety analysis is part of the acceptance criteria; boundary
/// objects are strictly versioned; promotion switches on two more checks.
pub fn development_profile() -> QualityProfile {
    QualityProfile {
        phase: Phase::Development,
        revision: 1,
        gate: Severity::Error,
        rules: vec![
            correspondence(),
            RuleConfig::new("consistency.self-mapping", Severity::Error),
            RuleConfig::new("version-consistency.baseline", Severity::Error),
            RuleConfig::new("version-consistency.stale-boundary-links", Severity::Warning).disabled(),
            RuleConfig::new("validity.artifacts", Severity::Error),
            RuleConfig::new("validity.links", Severity::Warning),
            RuleConfig::new("completeness.external-coverage", Severity::Warning),
            RuleConfig::new("completeness.signal-usage", Severity::Warning),
            RuleConfig::new("completeness.safety-analysis", Severity::Error),
            RuleConfig::new("completeness.boundary-owner", Severity::Warning).disabled(),
        ],
        versioning: boundary_strict(VersioningMode::Loose),
        promotion: crate::quality::PromotionParams {
            activate: vec![
                "version-consistency.stale-boundary-links".into(),
                "completeness.boundary-owner".into(),
            ],
        },
        controls: Default::default(),
        change_detection: Default::default(),
    }
}

/// Maintenance: everything that can block a delivery does.
pub fn maintenance_profile() -> QualityProfile {
    QualityProfile {
        phase: Phase::Maintenance,
        revision: 1,
        gate: Severity::Error,
        rules: vec![
            correspondence(),
            RuleConfig::new("consistency.self-mapping", Severity::Error),
            RuleConfig::new("version-consistency.baseline", Severity::Error),
            RuleConfig::new("version-consistency.stale-boundary-links", Severity::Warning),
            RuleConfig::new("validity.artifacts", Severity::Error),
            RuleConfig::new("validity.links", Severity::Error),
            RuleConfig::new("completeness.external-coverage", Severity::Error),
            RuleConfig::new("completeness.signal-usage", Severity::Error),
            RuleConfig::new("completeness.safety-analysis", Severity::Error),
            RuleConfig::new("completeness.boundary-owner", Severity::Warning),
        ],
        versioning: boundary_strict(VersioningMode::Mild),
        promotion: Default::default(),
        controls: Default::default(),
        change_detection: Default::default(),
    }
}

pub fn default_profiles() -> Vec<QualityProfile> {
    vec![prototype_profile(), development_profile(), maintenance_profile()]
}

pub fn default_profile(phase: Phase) -> QualityProfile {
    match phase {
        Phase::Prototype => prototype_profile(),
        Phase::Development => development_profile(),
        Phase::Maintenance => maintenance_profile(),
    }
}

/// Ids of the running example's artifacts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunningExample {
    pub hazard: ArtifactId,
    pub hazardous_event: ArtifactId,
    pub safety_goal: ArtifactId,
    pub interface: ArtifactId,
    pub signal: ArtifactId,
    pub mapping: ArtifactId,
    pub collision_controller: ArtifactId,
    pub brake_controller: ArtifactId,
}

impl RunningExample {
    pub fn all(&self) -> [&ArtifactId; 8] {
        [
            &self.hazard,
            &self.hazardous_event,
            &self.safety_goal,
            &self.interface,
            &self.signal,
            &self.mapping,
            &self.collision_controller,
            &self.brake_controller,
        ]
    }
}

/// Empty repository with the reference schema and users.
pub fn empty_repo(clock: Clock) -> Result<Repository> {
    let mut repo = Repository::new(fig1_schema(), clock)?;
    register_users(&mut repo)?;
    Ok(repo)
}

pub fn register_users(repo: &mut Repository) -> Result<()> {
    let cs = ChangeSet::system();
    for u in users() {
        repo.register_user(&cs, u)?;
    }
    Ok(())
}

fn text(pairs: &[(&str, &str)]) -> Attributes {
    pairs.iter().map(|(k, v)| (k.to_string(), (*v).into())).collect()
}

/// Builds the running example into `repo`.
pub fn build_running_example(repo: &mut Repository) -> Result<RunningExample> {
    let cs = repo.change_set("sam", "safety");
    let hazard = repo.create_artifact(&cs, "Hazard", "transmission delay", Attributes::new())?;
    let hazardous_event =
        repo.create_artifact(&cs, "HazardousEvent", "collision at medium speed", Attributes::new())?;
    let safety_goal =
        repo.create_artifact(&cs, "SafetyGoal", "latency and jitter", text(&[("ASIL", "B")]))?;
    repo.set_scope(&cs, &safety_goal, Scope::VerticalBoundary)?;
    repo.create_link(&cs, "results-in", vec![hazard.clone()], vec![hazardous_event.clone()], TypeCheck::Enforce)?;
    repo.create_link(&cs, "mitigates", vec![safety_goal.clone()], vec![hazardous_event.clone()], TypeCheck::Enforce)?;

    let cs = repo.change_set("rachel", "function");
    let interface = repo.create_artifact(
        &cs,
        "FunctionInterface",
        "Vehicle and object status",
        text(&[("data_type", "Integer")]),
    )?;
    repo.set_scope(&cs, &interface, Scope::VerticalBoundary)?;
    repo.create_link(&cs, "allocated-to", vec![safety_goal.clone()], vec![interface.clone()], TypeCheck::Enforce)?;

    let cs = repo.change_set("anna", "collision");
    let signal = repo.create_artifact(
        &cs,
        "Signal",
        "relative velocity signal",
        text(&[("data_type", "Integer")]),
    )?;
    repo.set_scope(&cs, &signal, Scope::HorizontalBoundary)?;

    let cs = repo.change_set("rachel", "function");
    let mapping = repo
        .create_mapped_link(&cs, "realizes", &interface, &signal, TypeCheck::Enforce)?
        .mapping;

    let cs = repo.change_set("anna", "collision");
    let collision_controller =
        repo.create_artifact(&cs, "Component", "collision controller", Attributes::new())?;
    repo.create_link(&cs, "produces", vec![collision_controller.clone()], vec![signal.clone()], TypeCheck::Enforce)?;

    let cs = repo.change_set("ben", "brake");
    let brake_controller =
        repo.create_artifact(&cs, "Component", "brake controller", Attributes::new())?;
    repo.create_link(&cs, "consumes", vec![brake_controller.clone()], vec![signal.clone()], TypeCheck::Enforce)?;

    Ok(RunningExample {
        hazard,
        hazardous_event,
        safety_goal,
        interface,
        signal,
        mapping,
        collision_controller,
        brake_controller,
    })
}

pub fn running_example(clock: Clock) -> Result<(Repository, RunningExample)> {
    let mut repo = empty_repo(clock)?;
    let ex = build_running_example(&mut repo)?;
    Ok((repo, ex))
}

/// Adds a function without any hazard analysis, the defect the prototype
/// phase tolerates and later phases do not.
pub fn add_unanalysed_function(repo: &mut Repository, title: &str) -> Result<ArtifactId> {
    let cs = repo.change_set("rachel", "function");
    repo.create_artifact(&cs, "Function", title, Attributes::new())
}

