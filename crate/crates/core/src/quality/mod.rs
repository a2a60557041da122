//! Data-quality checks, phase profiles and the acceptance gate.
//!
//! Four built-in families: consistency, version consistency, validity and
//! completeness. A profile configures concrete rule instances; a rule's
//! `check_id` is `<kind>` or `<kind>:<instance>`, where `kind` picks the
//! detector and `params` configure it. Detection never depends on
//! severity: severity is attached afterwards from the rule configuration.

mod completeness;
mod consistency;
mod validity;
mod version_consistency;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::ids::BaselineId;
use crate::org::ControlTable;
use crate::repo::{Repository, TypeCheck};
use crate::versioning::{Baseline, PolicyTable};

pub use completeness::{BoundaryOwnerParams, ExternalCoverageParams, SafetyAnalysisParams, SignalUsageParams};
pub use consistency::CorrespondenceParams;
pub use version_consistency::version_conflicts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Prototype,
    Development,
    Maintenance,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Prototype, Phase::Development, Phase::Maintenance];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Prototype => "prototype",
            Phase::Development => "development",
            Phase::Maintenance => "maintenance",
        }
    }

    pub fn parse(s: &str) -> Option<Phase> {
        Phase::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Error => "error",
        }
    }

    pub fn parse(s: &str) -> Result<Severity> {
        match s {
            "info" => Ok(Severity::Info),
            "warning" => Ok(Severity::Warning),
            "error" => Ok(Severity::Error),
            _ => Err(Error::InvalidSeverity(s.to_string())),
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Consistency,
    VersionConsistency,
    Validity,
    Completeness,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Consistency => "consistency",
            Family::VersionConsistency => "version-consistency",
            Family::Validity => "validity",
            Family::Completeness => "completeness",
        }
    }
}

/// Built-in detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Correspondence,
    SelfMapping,
    BaselineVersions,
    StaleBoundaryLinks,
    ArtifactValidity,
    LinkValidity,
    ExternalCoverage,
    SignalUsage,
    SafetyAnalysis,
    BoundaryOwner,
}

impl CheckKind {
    pub const ALL: [CheckKind; 10] = [
        CheckKind::Correspondence,
        CheckKind::SelfMapping,
        CheckKind::BaselineVersions,
        CheckKind::StaleBoundaryLinks,
        CheckKind::ArtifactValidity,
        CheckKind::LinkValidity,
        CheckKind::ExternalCoverage,
        CheckKind::SignalUsage,
        CheckKind::SafetyAnalysis,
        CheckKind::BoundaryOwner,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Correspondence => "consistency.correspondence",
            CheckKind::SelfMapping => "consistency.self-mapping",
            CheckKind::BaselineVersions => "version-consistency.baseline",
            CheckKind::StaleBoundaryLinks => "version-consistency.stale-boundary-links",
            CheckKind::ArtifactValidity => "validity.artifacts",
            CheckKind::LinkValidity => "validity.links",
            CheckKind::ExternalCoverage => "completeness.external-coverage",
            CheckKind::SignalUsage => "completeness.signal-usage",
            CheckKind::SafetyAnalysis => "completeness.safety-analysis",
            CheckKind::BoundaryOwner => "completeness.boundary-owner",
        }
    }

    pub fn family(self) -> Family {
        match self {
            CheckKind::Correspondence | CheckKind::SelfMapping => Family::Consistency,
            CheckKind::BaselineVersions | CheckKind::StaleBoundaryLinks => Family::VersionConsistency,
            CheckKind::ArtifactValidity | CheckKind::LinkValidity => Family::Validity,
            _ => Family::Completeness,
        }
    }

    /// Kind named by the part of `check_id` before any `:`.
    pub fn of_check_id(check_id: &str) -> Option<CheckKind> {
        let kind = check_id.split_once(':').map_or(check_id, |(k, _)| k);
        CheckKind::ALL.into_iter().find(|k| k.name() == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleConfig {
    pub check_id: String,
    #[serde(default = "yes")]
    pub enabled: bool,
    pub severity: Severity,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub params: Map<String, Value>,
}

fn yes() -> bool {
    true
}

impl RuleConfig {
    pub fn new(check_id: &str, severity: Severity) -> RuleConfig {
        RuleConfig {
            check_id: check_id.to_string(),
            enabled: true,
            severity,
            params: Map::new(),
        }
    }

    pub fn disabled(mut self) -> RuleConfig {
        self.enabled = false;
        self
    }

    pub fn param(mut self, key: &str, value: Value) -> RuleConfig {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn kind(&self) -> Result<CheckKind> {
        CheckKind::of_check_id(&self.check_id).ok_or_else(|| Error::UnknownCheckId(self.check_id.clone()))
    }

    pub(crate) fn typed_params<T: serde::de::DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(Value::Object(self.params.clone())).map_err(|e| {
            Error::InvalidProfile(format!("params of `{}`: {e}", self.check_id))
        })
    }
}

/// Rules listed here are enabled when an artifact is promoted to a boundary object.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromotionParams {
    #[serde(default)]
    pub activate: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeDetection {
    /// Minimum co-change count for an artifact to count as impacted.
    #[serde(default = "two")]
    pub cochange_threshold: usize,
    #[serde(default = "two")]
    pub boundary_team_threshold: usize,
    /// Inclusive journal sequence window for mining; whole journal if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(u64, u64)>,
}

fn two() -> usize {
    2
}

impl Default for ChangeDetection {
    fn default() -> Self {
        ChangeDetection {
            cochange_threshold: 2,
            boundary_team_threshold: 2,
            window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityProfile {
    pub phase: Phase,
    #[serde(default = "one")]
    pub revision: u32,
    /// Findings at or above this severity fail the gate.
    pub gate: Severity,
    pub rules: Vec<RuleConfig>,
    #[serde(default)]
    pub versioning: PolicyTable,
    #[serde(default)]
    pub promotion: PromotionParams,
    #[serde(default)]
    pub controls: ControlTable,
    #[serde(default)]
    pub change_detection: ChangeDetection,
}

fn one() -> u32 {
    1
}

impl QualityProfile {
    pub fn from_json(text: &str) -> Result<QualityProfile> {
        let profile: QualityProfile = serde_json::from_str(text).map_err(|e| {
            // control-table nesting errors surface through serde; keep their wording
            Error::InvalidProfile(e.to_string())
        })?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for r in &self.rules {
            if !seen.insert(r.check_id.as_str()) {
                return Err(Error::InvalidProfile(format!("duplicate check id `{}`", r.check_id)));
            }
            check_params(r)?;
        }
        for id in &self.promotion.activate {
            if self.rule(id).is_none() {
                return Err(Error::UnknownCheckId(id.clone()));
            }
        }
        if self.change_detection.boundary_team_threshold < 2 {
            return Err(Error::InvalidThreshold(self.change_detection.boundary_team_threshold));
        }
        self.versioning.validate()
    }

    pub fn rule(&self, check_id: &str) -> Option<&RuleConfig> {
        self.rules.iter().find(|r| r.check_id == check_id)
    }

    pub fn rule_mut(&mut self, check_id: &str) -> Option<&mut RuleConfig> {
        self.rules.iter_mut().find(|r| r.check_id == check_id)
    }

    /// Endpoint-type violations are hard errors only while link validity is
    /// enforced at error severity.
    pub fn link_type_check(&self) -> TypeCheck {
        let enforced = self
            .rules
            .iter()
            .filter(|r| r.enabled && matches!(r.kind(), Ok(CheckKind::LinkValidity)))
            .any(|r| r.severity >= Severity::Error);
        if enforced {
            TypeCheck::Enforce
        } else {
            TypeCheck::Lenient
        }
    }
}

fn check_params(rule: &RuleConfig) -> Result<()> {
    match rule.kind()? {
        CheckKind::Correspondence => rule.typed_params::<CorrespondenceParams>().map(drop),
        CheckKind::ExternalCoverage => rule.typed_params::<ExternalCoverageParams>().map(drop),
        CheckKind::SignalUsage => rule.typed_params::<SignalUsageParams>().map(drop),
        CheckKind::SafetyAnalysis => rule.typed_params::<SafetyAnalysisParams>().map(drop),
        CheckKind::BoundaryOwner => rule.typed_params::<BoundaryOwnerParams>().map(drop),
        _ => Ok(()),
    }
}

/// Exact ratio, serialized as `"n/d"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(pub Ratio<u64>);

impl Rational {
    pub fn new(num: u64, den: u64) -> Rational {
        if den == 0 {
            Rational(Ratio::from_integer(1))
        } else {
            Rational(Ratio::new(num, den))
        }
    }

    /// `covered / total`, with an empty universe counting as complete.
    pub fn coverage(covered: usize, total: usize) -> Rational {
        Rational::new(covered as u64, total as u64)
    }

    pub fn percent(&self) -> String {
        let v = *self.0.numer() as f64 / *self.0.denom() as f64 * 100.0;
        format!("{v:.1}%")
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let (n, den) = text
            .split_once('/')
            .ok_or_else(|| serde::de::Error::custom("expected n/d"))?;
        let n: u64 = n.trim().parse().map_err(serde::de::Error::custom)?;
        let den: u64 = den.trim().parse().map_err(serde::de::Error::custom)?;
        if den == 0 {
            return Err(serde::de::Error::custom("zero denominator"));
        }
        Ok(Rational(Ratio::new(n, den)))
    }
}

/// A detected problem before severity is attached.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Detected {
    pub subject_ids: Vec<String>,
    pub message: String,
}

impl Detected {
    pub fn new(subject_ids: Vec<String>, message: impl Into<String>) -> Detected {
        Detected {
            subject_ids,
            message: message.into(),
        }
    }
}

/// Output of one detector run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Detection {
    pub findings: Vec<Detected>,
    pub metrics: Vec<(String, Rational)>,
    pub notices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityFinding {
    pub check_id: String,
    pub family: Family,
    pub severity: Severity,
    pub subject_ids: Vec<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub phase: Phase,
    pub profile_revision: u32,
    /// Audited baseline id, or `working` for current heads.
    pub baseline: String,
    pub findings: Vec<QualityFinding>,
    pub metrics: BTreeMap<String, Rational>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notices: Vec<String>,
    pub passed: bool,
}

impl QualityReport {
    pub fn count_at_least(&self, severity: Severity) -> usize {
        self.findings.iter().filter(|f| f.severity >= severity).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GateDecision {
    pub passed: bool,
    pub gate: Severity,
    pub blocking: Vec<QualityFinding>,
}

pub(crate) struct Ctx<'a> {
    pub repo: &'a Repository,
    pub baseline: &'a Baseline,
}

/// Baseline of every live link and artifact at its current head.
pub fn working_baseline(repo: &Repository) -> Baseline {
    Baseline {
        id: BaselineId::new("working"),
        name: "working".into(),
        created_at: repo.clock().now(),
        artifact_versions: repo.artifacts().map(|a| (a.id.clone(), a.version)).collect(),
        link_versions: repo.links().map(|l| (l.id.clone(), l.version)).collect(),
        frozen: false,
    }
}

pub fn detect(repo: &Repository, baseline: &Baseline, rule: &RuleConfig) -> Result<Detection> {
    let ctx = Ctx { repo, baseline };
    let mut d = match rule.kind()? {
        CheckKind::Correspondence => consistency::correspondence(&ctx, &rule.typed_params()?),
        CheckKind::SelfMapping => consistency::self_mapping(&ctx),
        CheckKind::BaselineVersions => version_consistency::baseline_versions(&ctx),
        CheckKind::StaleBoundaryLinks => version_consistency::stale_boundary_links(&ctx),
        CheckKind::ArtifactValidity => validity::artifacts(&ctx),
        CheckKind::LinkValidity => validity::links(&ctx),
        CheckKind::ExternalCoverage => completeness::external_coverage(&ctx, &rule.typed_params()?),
        CheckKind::SignalUsage => completeness::signal_usage(&ctx, &rule.typed_params()?),
        CheckKind::SafetyAnalysis => completeness::safety_analysis(&ctx, &rule.typed_params()?),
        CheckKind::BoundaryOwner => completeness::boundary_owner(&ctx, &rule.typed_params()?),
    };
    d.findings.sort();
    Ok(d)
}

/// Runs every enabled rule of `profile` and applies the gate.
///
/// Rules run on separate threads over the same read-only repository; the
/// report is assembled in rule order, so it does not depend on scheduling.
pub fn run_checks(
    repo: &Repository,
    baseline: Option<&BaselineId>,
    profile: &QualityProfile,
) -> Result<QualityReport> {
    let working;
    let base = match baseline {
        Some(id) => repo.baseline(id)?,
        None => {
            working = working_baseline(repo);
            &working
        }
    };
    let rules: Vec<&RuleConfig> = profile.rules.iter().filter(|r| r.enabled).collect();
    let results: Vec<Result<Detection>> = std::thread::scope(|s| {
        let handles: Vec<_> = rules
            .iter()
            .map(|r| s.spawn(move || detect(repo, base, r)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("check thread panicked"))
            .collect()
    });
    let mut report = QualityReport {
        phase: profile.phase,
        profile_revision: profile.revision,
        baseline: base.id.0.clone(),
        findings: vec![],
        metrics: BTreeMap::new(),
        notices: vec![],
        passed: true,
    };
    for (rule, result) in rules.iter().zip(results) {
        let d = result?;
        let family = rule.kind()?.family();
        for f in d.findings {
            report.findings.push(QualityFinding {
                check_id: rule.check_id.clone(),
                family,
                severity: rule.severity,
                subject_ids: f.subject_ids,
                message: f.message,
            });
        }
        report.metrics.extend(d.metrics);
        report
            .notices
            .extend(d.notices.into_iter().map(|n| format!("{}: {n}", rule.check_id)));
    }
    report.passed = report.count_at_least(profile.gate) == 0;
    Ok(report)
}

pub fn assess(report: &QualityReport, profile: &QualityProfile) -> Result<GateDecision> {
    if report.phase != profile.phase || report.profile_revision != profile.revision {
        return Err(Error::ProfileMismatch(format!(
            "report {} r{}, profile {} r{}",
            report.phase, report.profile_revision, profile.phase, profile.revision
        )));
    }
    let blocking: Vec<QualityFinding> = report
        .findings
        .iter()
        .filter(|f| f.severity >= profile.gate)
        .cloned()
        .collect();
    Ok(GateDecision {
        passed: blocking.is_empty(),
        gate: profile.gate,
        blocking,
    })
}
