//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use tracekit::change::{self, apply_migration, detect_boundary_candidates, mine_cochanges, BoundaryKind};
use tracekit::exchange::{self, EXTERNAL_TYPE};
use tracekit::model::{ArtifactChanges, Attributes, MappingRole, RigidityGroup};
use tracekit::org::{Control, ControlTable};
use tracekit::quality::{self, version_conflicts, Family, QualityProfile, RuleConfig, Severity};
use tracekit::repo::TypeCheck;
use tracekit::select::Selector;
use tracekit::store::Store;
use tracekit::synth::{self, Op};
use tracekit::tim::{diff_tim, Mediation};
use tracekit::versioning::{Baseline, PolicyTable, VersionOutcome, VersioningMode};
use tracekit::{fixtures, ArtifactId, BaselineId, Clock, Error, OpKind, Payload, Repository, Scope};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const CLOCK: &str = "2021-05-01T08:00:00Z";

fn clock() -> Clock {
    Clock::fixed_rfc3339(CLOCK).unwrap()
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("running example reproduction", running_example),
        ("seeded defects per check family", seeded_defects),
        ("migration preserves related pairs", migration_semantics),
        ("versioning policy matrix", versioning_matrix),
        ("phase-dependent gate via CLI", phase_gate),
        ("boundary candidates and promotion", boundary_candidates),
        ("ReqIF subset round trip", reqif_round_trip),
        ("rigidity control nesting", rigidity_nesting),
        ("scale: 200k links, 50k artifacts", scale),
        ("journal replay equivalence", replay_equivalence),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {:>2}: {name} ({detail}; {secs:.2}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2}: {name} ({why}; {secs:.2}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- CLI helpers

struct Cli {
    _dir: tempfile::TempDir,
    repo: PathBuf,
    user: String,
    team: String,
}

struct Run {
    code: i32,
    out: String,
    err: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.out).unwrap_or_else(|e| panic!("not JSON ({e}): {}", self.out))
    }
}

impl Cli {
    fn new() -> Cli {
        let dir = tempfile::tempdir().unwrap();
        let repo = dir.path().join("repo");
        Cli {
            _dir: dir,
            repo,
            user: "sam".into(),
            team: "safety".into(),
        }
    }

    fn as_user(&mut self, user: &str, team: &str) -> &mut Cli {
        self.user = user.into();
        self.team = team.into();
        self
    }

    fn run(&self, args: &[&str]) -> Run {
        let mut argv: Vec<String> = vec!["tracekit".into(), "--repo".into(), self.repo.display().to_string()];
        argv.extend(["--clock".into(), CLOCK.into(), "--team".into(), self.team.clone()]);
        argv.extend(args.iter().map(|s| s.to_string()));
        let env = BTreeMap::from([("TRACEKIT_USER".to_string(), self.user.clone())]);
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = tracekit_cli::run(argv, &env, &mut out, &mut err);
        Run {
            code,
            out: String::from_utf8(out).unwrap(),
            err: String::from_utf8(err).unwrap(),
        }
    }

    /// Runs a `--json` command that must succeed and returns the created id.
    fn create(&self, args: &[&str]) -> Result<String, String> {
        let mut full = vec!["--json"];
        full.extend_from_slice(args);
        let r = self.run(&full);
        ensure!(r.code == 0, "`{}` exited {}: {}", args.join(" "), r.code, r.err.trim());
        let v = r.json();
        let id = v.get("id").or_else(|| v.get("mapping")).and_then(Value::as_str);
        id.map(str::to_string).ok_or_else(|| format!("no id in {v}"))
    }
}

fn findings(report: &Value) -> Vec<&Value> {
    report["findings"].as_array().map(|a| a.iter().collect()).unwrap_or_default()
}

// ---------------------------------------------------------------- 1

fn running_example() -> Outcome {
    let start = Instant::now();
    let mut cli = Cli::new();
    let r = cli.run(&["init"]);
    ensure!(r.code == 0, "init exited {}: {}", r.code, r.err);

    cli.as_user("sam", "safety");
    let hazard = cli.create(&["add", "Hazard", "transmission delay"])?;
    let event = cli.create(&["add", "HazardousEvent", "collision at medium speed"])?;
    let goal = cli.create(&["add", "SafetyGoal", "latency and jitter", "--attr", "ASIL=B", "--scope", "vertical-boundary"])?;
    cli.create(&["link", "results-in", "--from", &hazard, "--to", &event])?;
    cli.create(&["link", "mitigates", "--from", &goal, "--to", &event])?;
    cli.as_user("rachel", "function");
    let fi = cli.create(&[
        "add",
        "FunctionInterface",
        "Vehicle and object status",
        "--attr",
        "data_type=Integer",
        "--scope",
        "vertical-boundary",
    ])?;
    cli.create(&["link", "allocated-to", "--from", &goal, "--to", &fi])?;
    cli.as_user("anna", "collision");
    let signal = cli.create(&[
        "add",
        "Signal",
        "relative velocity signal",
        "--attr",
        "data_type=Integer",
        "--scope",
        "horizontal-boundary",
    ])?;
    cli.as_user("rachel", "function");
    let mo = cli.create(&["map", "realizes", &fi, &signal])?;
    cli.as_user("anna", "collision");
    let cc = cli.create(&["add", "Component", "collision controller"])?;
    cli.create(&["link", "produces", "--from", &cc, "--to", &signal])?;
    cli.as_user("ben", "brake");
    let bc = cli.create(&["add", "Component", "brake controller"])?;
    cli.create(&["link", "consumes", "--from", &bc, "--to", &signal])?;

    // the script and the library fixture build the same instance level
    let store = Store::new(&cli.repo);
    let built = store.load(clock()).map_err(|e| e.to_string())?;
    let (reference, _) = fixtures::running_example(clock()).unwrap();
    let shape = |repo: &Repository| -> BTreeSet<(String, String, String)> {
        repo.artifacts()
            .map(|a| (a.type_name.clone(), a.title.clone(), a.scope.as_str().to_string()))
            .collect()
    };
    ensure!(shape(&built) == shape(&reference), "instance level differs from the fixture");
    ensure!(built.is_mapping_object(built.artifact(&ArtifactId::new(mo.as_str())).unwrap()), "{mo} is not a mapping object");

    let r = cli.run(&["--json", "check", "--phase", "development"]);
    let report = r.json();
    let errors = findings(&report).iter().filter(|f| f["severity"] == "error").count();
    ensure!(r.code == 0 && errors == 0, "development check: exit {}, {errors} errors", r.code);

    cli.as_user("anna", "collision");
    let r = cli.run(&["edit", &signal, "--attr", "data_type=Real"]);
    ensure!(r.code == 0, "edit exited {}: {}", r.code, r.err);
    let r = cli.run(&["--json", "check", "--phase", "development"]);
    let report = r.json();
    let consistency: Vec<&Value> = findings(&report).into_iter().filter(|f| f["family"] == "consistency").collect();
    ensure!(consistency.len() == 1, "{} consistency findings after the datatype change", consistency.len());
    ensure!(
        consistency[0]["subject_ids"] == serde_json::json!([fi, signal]),
        "finding names {}",
        consistency[0]["subject_ids"]
    );
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("clean, then 1 consistency finding; {} ms end to end", elapsed.as_millis()))
}

// ---------------------------------------------------------------- 2

fn profile_of(rules: Vec<RuleConfig>) -> QualityProfile {
    QualityProfile {
        rules,
        ..fixtures::development_profile()
    }
}

fn rule_from(profile: &QualityProfile, check_id: &str) -> RuleConfig {
    let mut r = profile.rule(check_id).unwrap_or_else(|| panic!("{check_id} missing")).clone();
    r.enabled = true;
    r
}

fn loose() -> PolicyTable {
    PolicyTable::uniform(VersioningMode::Loose)
}

/// Adds `n` defects of `family` to the running example and returns the profile auditing it.
fn seed(repo: &mut Repository, family: Family, n: usize) -> QualityProfile {
    match family {
        Family::Consistency => {
            let cs = repo.change_set("rachel", "function");
            for i in 0..n {
                let text = |v: &str| Attributes::from([("data_type".to_string(), v.into())]);
                let fi = repo.create_artifact(&cs, "FunctionInterface", &format!("fi{i}"), text("Integer")).unwrap();
                let s = repo.create_artifact(&cs, "Signal", &format!("s{i}"), text("Real")).unwrap();
                repo.create_mapped_link(&cs, "realizes", &fi, &s, TypeCheck::Enforce).unwrap();
            }
            profile_of(vec![rule_from(
                &fixtures::development_profile(),
                "consistency.correspondence:realizes-data-type",
            )])
        }
        Family::VersionConsistency => {
            let cs = repo.change_set("anna", "collision");
            for i in 0..n {
                let s = repo.create_artifact(&cs, "Signal", &format!("s{i}"), Attributes::new()).unwrap();
                let c = repo.create_artifact(&cs, "Component", &format!("p{i}"), Attributes::new()).unwrap();
                repo.create_link(&cs, "produces", vec![c], vec![s.clone()], TypeCheck::Enforce).unwrap();
                repo.update_artifact(&cs, &s, ArtifactChanges::default().bump(), &loose()).unwrap();
                let d = repo.create_artifact(&cs, "Component", &format!("c{i}"), Attributes::new()).unwrap();
                repo.create_link(&cs, "consumes", vec![d], vec![s], TypeCheck::Enforce).unwrap();
            }
            profile_of(vec![RuleConfig::new("version-consistency.baseline", Severity::Error)])
        }
        Family::Validity => {
            let cs = repo.change_set("anna", "collision");
            for i in 0..n {
                let c = repo.create_artifact(&cs, "Component", &format!("c{i}"), Attributes::new()).unwrap();
                let h = repo.create_artifact(&cs, "Hazard", &format!("h{i}"), Attributes::new()).unwrap();
                repo.create_link(&cs, "produces", vec![c], vec![h], TypeCheck::Lenient).unwrap();
            }
            profile_of(vec![
                RuleConfig::new("validity.artifacts", Severity::Error),
                RuleConfig::new("validity.links", Severity::Error),
            ])
        }
        Family::Completeness => {
            for i in 0..n {
                fixtures::add_unanalysed_function(repo, &format!("function {i}")).unwrap();
            }
            profile_of(vec![rule_from(&fixtures::maintenance_profile(), "completeness.safety-analysis")])
        }
    }
}

/// Pins of link `lid` at version `v`, read straight from the journal.
fn pins_from_journal(repo: &Repository, lid: &tracekit::LinkId, v: u32) -> Option<BTreeMap<ArtifactId, u32>> {
    repo.journal().iter().rev().find_map(|e| match &e.payload {
        Payload::Link(l) if &l.id == lid && l.version == v => Some(l.endpoint_versions.clone()),
        _ => None,
    })
}

fn seeded_defects() -> Outcome {
    let families = [Family::Consistency, Family::VersionConsistency, Family::Validity, Family::Completeness];
    for family in families {
        for n in [0, 1, 3] {
            let (mut repo, _) = fixtures::running_example(clock()).unwrap();
            let profile = seed(&mut repo, family, n);
            let report = quality::run_checks(&repo, None, &profile).map_err(|e| e.to_string())?;
            let found = report.findings.iter().filter(|f| f.family == family).count();
            ensure!(found == n, "{}: seeded {n}, found {found}", family.as_str());
            ensure!(report.findings.len() == n, "{}: {} findings in total", family.as_str(), report.findings.len());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut conflicts = 0;
    for round in 0..100 {
        let mut repo = fixtures::empty_repo(clock()).unwrap();
        let ops: Vec<Op> = synth::random_ops(&mut rng, 120);
        synth::run_session(&mut repo, &ops, &PolicyTable::uniform(VersioningMode::Strict));
        let artifacts: Vec<ArtifactId> = repo.artifacts().map(|a| a.id.clone()).take(50).collect();
        let links: Vec<&tracekit::TraceLink> = repo
            .state()
            .links
            .values()
            .filter(|l| l.endpoints().all(|e| artifacts.contains(e)))
            .collect();
        let baseline = Baseline {
            id: BaselineId::new(format!("rb{round}")),
            name: "random".into(),
            created_at: clock().now(),
            artifact_versions: artifacts.iter().map(|a| (a.clone(), repo.artifact(a).unwrap().version)).collect(),
            link_versions: links
                .iter()
                .filter_map(|l| {
                    let keep = rng.gen_bool(0.8);
                    let v = rng.gen_range(1..=l.version);
                    keep.then_some((l.id.clone(), v))
                })
                .collect(),
            frozen: true,
        };
        let mut oracle: BTreeMap<ArtifactId, BTreeSet<u32>> = BTreeMap::new();
        for (lid, v) in &baseline.link_versions {
            for (a, av) in pins_from_journal(&repo, lid, *v).ok_or("pinned version missing from journal")? {
                oracle.entry(a).or_default().insert(av);
            }
        }
        oracle.retain(|_, vs| vs.len() > 1);
        let found: BTreeMap<ArtifactId, BTreeSet<u32>> = version_conflicts(&repo, &baseline)
            .into_iter()
            .map(|(a, (vs, _))| (a, vs))
            .collect();
        ensure!(found == oracle, "baseline round {round} differs from the journal oracle");
        conflicts += oracle.len();
    }
    ensure!(conflicts > 0, "random baselines never produced a conflict");
    Ok(format!("4 families x N in {{0,1,3}}; 100 random baselines, {conflicts} conflicts matched"))
}

// ---------------------------------------------------------------- 3

/// Related pairs by scanning every link and every mapping object.
fn pairs_oracle(repo: &Repository, link_type: &str) -> BTreeSet<(ArtifactId, ArtifactId)> {
    let st = repo.state();
    let mut out = BTreeSet::new();
    for l in st.links.values() {
        if l.deleted || l.link_type != link_type || l.mapping_role.is_some() {
            continue;
        }
        for s in &l.sources {
            for t in &l.targets {
                out.insert((s.clone(), t.clone()));
            }
        }
    }
    for m in st.artifacts.values() {
        if m.deleted || !st.tim.is_mapping_type(&m.type_name) {
            continue;
        }
        let ends = |role: MappingRole| -> Vec<ArtifactId> {
            st.links
                .values()
                .filter(|l| !l.deleted && l.link_type == link_type && l.mapping_role == Some(role) && l.sources == [m.id.clone()])
                .flat_map(|l| l.targets.clone())
                .collect()
        };
        for a in ends(MappingRole::Source) {
            for b in ends(MappingRole::Target) {
                out.insert((a.clone(), b.clone()));
            }
        }
    }
    out
}

fn all_pairs(repo: &Repository) -> BTreeMap<String, BTreeSet<(ArtifactId, ArtifactId)>> {
    repo.tim()
        .link_types
        .iter()
        .map(|lt| (lt.name.clone(), repo.related_pairs(&lt.name).unwrap()))
        .collect()
}

fn migrate(repo: &mut Repository, link_type: &str, to: Mediation) -> tracekit::Result<()> {
    let old = repo.tim().clone();
    let mut new = old.clone();
    new.schema_version += 1;
    new.link_types.iter_mut().find(|l| l.name == link_type).unwrap().mediation = to;
    let plan = diff_tim(&old, &new)?;
    let cs = repo.change_set("rachel", "function");
    apply_migration(repo, &cs, &plan).map(drop)
}

fn migration_semantics() -> Outcome {
    let mut conflicts = 0;
    let mut pairs_checked = 0;
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(3..=50);
        let m = rng.gen_range(0..=80);
        let mut repo = synth::random_graph(&mut rng, n, m, clock()).map_err(|e| e.to_string())?;
        ensure!(repo.artifacts().count() <= 50 + m && repo.links().count() <= 3 * 80, "graph {seed} too large");
        let before = all_pairs(&repo);
        for (lt, pairs) in &before {
            ensure!(*pairs == pairs_oracle(&repo, lt), "graph {seed}: related_pairs({lt}) disagrees with the scan");
            pairs_checked += pairs.len();
        }

        // a mapping object with an extra link cannot be collapsed
        let mo = repo.artifacts().find(|a| repo.is_mapping_object(a)).map(|a| a.id.clone());
        if let Some(mo) = mo {
            let mut conflicting = repo.clone();
            let other = conflicting.artifacts().find(|a| a.id != mo).map(|a| a.id.clone()).unwrap();
            let cs = conflicting.change_set("mia", "design");
            conflicting
                .create_link(&cs, "hyperlink", vec![mo], vec![other], TypeCheck::Lenient)
                .map_err(|e| e.to_string())?;
            let hash = conflicting.state_hash();
            let result = migrate(&mut conflicting, "realizes", Mediation::Direct);
            ensure!(matches!(result, Err(Error::MigrationConflict(_))), "graph {seed}: expected a conflict, got {result:?}");
            ensure!(conflicting.state_hash() == hash, "graph {seed}: failed migration changed the state");
            conflicts += 1;
        }

        for (lt, to) in [
            ("produces", Mediation::Mapped),
            ("realizes", Mediation::Direct),
            ("produces", Mediation::Direct),
            ("realizes", Mediation::Mapped),
        ] {
            migrate(&mut repo, lt, to).map_err(|e| format!("graph {seed}: {lt} -> {to:?}: {e}"))?;
            ensure!(all_pairs(&repo) == before, "graph {seed}: {lt} -> {to:?} changed related pairs");
        }
        let replayed = Repository::replay(repo.journal().to_vec(), clock()).map_err(|e| e.to_string())?;
        ensure!(replayed.state_hash() == repo.state_hash(), "graph {seed}: replay differs after migration");
    }
    ensure!(conflicts > 0, "no graph had a mapping object");
    Ok(format!("200 graphs, {pairs_checked} pairs preserved over 4 migrations each; {conflicts} conflicts left state intact"))
}

// ---------------------------------------------------------------- 4

fn replay_matches(repo: &Repository) -> Result<(), String> {
    let replayed = Repository::replay(repo.journal().to_vec(), clock()).map_err(|e| e.to_string())?;
    ensure!(replayed.state_hash() == repo.state_hash(), "replay differs");
    Ok(())
}

fn versioning_matrix() -> Outcome {
    let mild = PolicyTable::uniform(VersioningMode::Mild);
    let mut cases = 0;
    for local in [false, true] {
        for linked in [false, true] {
            for major in [false, true] {
                let mut repo = fixtures::empty_repo(clock()).unwrap();
                let setup = repo.change_set("mia", "design");
                let subject = repo.create_artifact(&setup, "Component", "subject", Attributes::new()).unwrap();
                if !local {
                    repo.set_scope(&setup, &subject, Scope::HorizontalBoundary).unwrap();
                }
                let boundary = repo.create_artifact(&setup, "Signal", "boundary", Attributes::new()).unwrap();
                repo.set_scope(&setup, &boundary, Scope::HorizontalBoundary).unwrap();
                if linked {
                    repo.create_link(&setup, "produces", vec![subject.clone()], vec![boundary.clone()], TypeCheck::Enforce)
                        .unwrap();
                }
                let cs = repo.change_set("anna", "collision").major(major);
                repo.update_artifact(&cs, &boundary, ArtifactChanges::default().title("boundary v2"), &mild)
                    .map_err(|e| e.to_string())?;
                let got = repo
                    .update_artifact(&cs, &subject, ArtifactChanges::default().title("subject v2"), &mild)
                    .map_err(|e| e.to_string())?;
                // bump iff locally relevant, linked to a boundary object, and that object changed majorly here
                let expected = local && linked && major;
                ensure!(
                    matches!(got, VersionOutcome::Bumped(2)) == expected,
                    "local={local} linked={linked} major={major}: got {got:?}"
                );
                let last = repo.journal().last().unwrap();
                ensure!(
                    (last.op_kind == OpKind::VersionBump) == expected,
                    "journal records {:?} for local={local} linked={linked} major={major}",
                    last.op_kind
                );
                replay_matches(&repo)?;
                cases += 1;
            }
        }
    }

    // strict bumps on every mutation, loose only on request
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for mode in [VersioningMode::Strict, VersioningMode::Loose] {
        let table = PolicyTable::uniform(mode);
        let mut repo = fixtures::empty_repo(clock()).unwrap();
        let cs = repo.change_set("anna", "collision");
        let ids: Vec<ArtifactId> = (0..5)
            .map(|i| repo.create_artifact(&cs, "Component", &format!("c{i}"), Attributes::new()).unwrap())
            .collect();
        let mut expected: BTreeMap<ArtifactId, u32> = ids.iter().map(|id| (id.clone(), 1)).collect();
        for step in 0..60 {
            let id = ids.choose(&mut rng).unwrap().clone();
            let explicit = rng.gen_bool(0.3);
            let mut changes = ArtifactChanges::default().title(format!("edit {step}"));
            if explicit {
                changes = changes.bump();
            }
            let cs = repo.change_set("anna", "collision");
            let got = repo.update_artifact(&cs, &id, changes, &table).map_err(|e| e.to_string())?;
            let bumps = mode == VersioningMode::Strict || explicit;
            if bumps {
                *expected.get_mut(&id).unwrap() += 1;
            }
            ensure!(
                matches!(got, VersionOutcome::Bumped(_)) == bumps,
                "{} edit (explicit={explicit}) gave {got:?}",
                mode.as_str()
            );
        }
        replay_matches(&repo)?;
        let replayed = Repository::replay(repo.journal().to_vec(), clock()).unwrap();
        for (id, v) in &expected {
            let got = replayed.artifact(id).unwrap().version;
            ensure!(got == *v, "{}: replayed {id} at v{got}, expected v{v}", mode.as_str());
        }
    }
    Ok(format!("{cases} mild cases; strict and loose over 60 edits each, replay verified"))
}

// ---------------------------------------------------------------- 5

fn phase_gate() -> Outcome {
    let mut cli = Cli::new();
    let r = cli.run(&["init", "--example"]);
    ensure!(r.code == 0, "init exited {}: {}", r.code, r.err);
    cli.as_user("rachel", "function");
    cli.create(&["add", "Function", "lane keeping"])?;
    let proto = cli.run(&["--json", "check", "--phase", "prototype"]);
    let maint = cli.run(&["--json", "check", "--phase", "maintenance"]);
    ensure!(proto.code == 0, "prototype exit {}", proto.code);
    ensure!(maint.code == 3, "maintenance exit {}", maint.code);
    let blocking: Vec<String> = findings(&maint.json())
        .iter()
        .filter(|f| f["severity"] == "error")
        .map(|f| f["check_id"].as_str().unwrap_or("").to_string())
        .collect();
    ensure!(
        blocking == ["completeness.safety-analysis"],
        "maintenance blocked by {blocking:?}"
    );
    let a0 = cli.run(&["assess", "--phase", "prototype"]).code;
    let a3 = cli.run(&["assess", "--phase", "maintenance"]).code;
    ensure!((a0, a3) == (0, 3), "assess exits {a0}/{a3}");
    Ok("prototype exit 0, maintenance exit 3".into())
}

// ---------------------------------------------------------------- 6

/// Top contributor by entry count, then latest timestamp, then smallest id;
/// the creator counts once even without an entry.
fn owner_oracle(repo: &Repository, id: &ArtifactId) -> Option<String> {
    let mut stats: BTreeMap<&str, (usize, Option<tracekit::Timestamp>)> = BTreeMap::new();
    for e in repo.journal() {
        if e.actor != "system" && e.subject_ids.iter().any(|s| s == id.as_str()) {
            let s = stats.entry(e.actor.as_str()).or_default();
            s.0 += 1;
            s.1 = s.1.max(Some(e.timestamp));
        }
    }
    if let Some(a) = repo.artifact(id) {
        stats.entry(a.created_by.as_str()).or_insert((1, Some(a.created_at)));
    }
    let best = stats.values().copied().max()?;
    stats.iter().find(|(_, v)| **v == best).map(|(k, _)| k.to_string())
}

fn boundary_candidates() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut promoted = 0;
    let mut candidates = 0;
    for round in 0..30 {
        let (mut repo, _) = synth::random_session(&mut rng, 300, clock()).map_err(|e| e.to_string())?;
        let stats = mine_cochanges(repo.journal(), None);
        let mut teams: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for e in repo.journal() {
            if let Payload::Artifact(a) = &e.payload {
                teams.entry(a.id.as_str()).or_default().insert(&e.team);
            }
        }
        for threshold in 2..=4 {
            let found: BTreeSet<ArtifactId> = detect_boundary_candidates(&repo, &stats, threshold)
                .map_err(|e| e.to_string())?
                .into_iter()
                .map(|c| c.artifact)
                .collect();
            let oracle: BTreeSet<ArtifactId> = teams
                .iter()
                .filter(|(_, t)| t.len() >= threshold)
                .map(|(id, _)| ArtifactId::new(*id))
                .filter(|id| repo.artifact(id).is_some_and(|a| a.is_live() && a.scope == Scope::LocallyRelevant))
                .collect();
            ensure!(found == oracle, "round {round}, threshold {threshold}: candidates differ");
            candidates += found.len();
        }

        let Some(top) = detect_boundary_candidates(&repo, &stats, 2).unwrap().into_iter().next() else {
            continue;
        };
        let expected_owner = owner_oracle(&repo, &top.artifact);
        let mut profile = fixtures::development_profile();
        let disabled: Vec<String> = profile
            .promotion
            .activate
            .iter()
            .filter(|id| profile.rule(id).is_some_and(|r| !r.enabled))
            .cloned()
            .collect();
        let cs = repo.change_set("mia", "design");
        let report = change::promote_to_boundary(&mut repo, &cs, &top.artifact, BoundaryKind::Horizontal, &mut profile)
            .map_err(|e| e.to_string())?;
        ensure!(report.policy_after == VersioningMode::Strict, "promotion left policy {:?}", report.policy_after);
        ensure!(report.required_controls.contains(&Control::StrictVersioning), "strict versioning not required");
        ensure!(report.activated_checks == disabled, "activated {:?}, expected {disabled:?}", report.activated_checks);
        ensure!(
            profile.promotion.activate.iter().all(|id| profile.rule(id).is_some_and(|r| r.enabled)),
            "configured checks are not enabled"
        );
        ensure!(
            report.owner_suggestions.first() == expected_owner.as_ref(),
            "owner {:?}, oracle {expected_owner:?}",
            report.owner_suggestions.first()
        );
        promoted += 1;
    }
    ensure!(promoted > 0, "no session produced a candidate");
    Ok(format!("30 journals x 3 thresholds, {candidates} candidates; {promoted} promotions"))
}

// ---------------------------------------------------------------- 7

fn corpus() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/reqif/valid");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "reqif"))
        .collect();
    files.sort();
    files
}

fn reqif_round_trip() -> Outcome {
    let files = corpus();
    ensure!(files.len() == 20, "{} corpus documents", files.len());
    let mut objects = 0;
    let mut relations = 0;
    for path in &files {
        let (doc, _) = exchange::parse_reqif(&std::fs::read_to_string(path).unwrap()).map_err(|e| e.to_string())?;
        let mut repo = fixtures::empty_repo(clock()).unwrap();
        let cs = repo.change_set("cust", "customer");
        exchange::import_reqif(&mut repo, &cs, &doc).map_err(|e| e.to_string())?;
        let sel = Selector::parse(&format!("type={EXTERNAL_TYPE}")).unwrap();
        let out = exchange::export_reqif(&repo, &sel, &doc.header.identifier, &doc.header.creation_time)
            .map_err(|e| e.to_string())?;
        let objs = |d: &exchange::ReqIfDocument| -> BTreeSet<(String, String, String, String)> {
            d.spec_objects
                .iter()
                .map(|o| (o.identifier.clone(), o.last_change.clone(), o.long_name.clone(), o.text_value.clone()))
                .collect()
        };
        let rels = |d: &exchange::ReqIfDocument| -> BTreeSet<(String, String, String, String)> {
            d.spec_relations
                .iter()
                .map(|r| (r.identifier.clone(), r.source_ref.clone(), r.target_ref.clone(), r.type_name.clone()))
                .collect()
        };
        ensure!(out.header == doc.header, "{}: header changed", path.display());
        ensure!(objs(&out) == objs(&doc), "{}: spec objects changed", path.display());
        ensure!(rels(&out) == rels(&doc), "{}: spec relations changed", path.display());
        objects += doc.spec_objects.len();
        relations += doc.spec_relations.len();
    }

    // through the CLI: import, then a direct edit is refused with a data error
    let mut cli = Cli::new();
    cli.run(&["init"]);
    cli.as_user("cust", "customer");
    let r = cli.run(&["--json", "import-reqif", files[0].to_str().unwrap()]);
    ensure!(r.code == 0, "import exited {}: {}", r.code, r.err);
    let created = r.json()["import"]["created"][0].as_str().unwrap().to_string();
    let before = Store::new(&cli.repo).load(clock()).unwrap().state_hash();
    cli.as_user("rachel", "function");
    let edit = cli.run(&["edit", &created, "--title", "changed"]);
    ensure!(edit.code == 2 && edit.err.contains("imported"), "edit of {created}: exit {}", edit.code);
    let after = Store::new(&cli.repo).load(clock()).unwrap().state_hash();
    ensure!(before == after, "refused edit changed the repository");
    Ok(format!("20 documents, {objects} objects, {relations} relations identical; edits refused"))
}

// ---------------------------------------------------------------- 8

fn nested(t: &BTreeMap<RigidityGroup, BTreeSet<Control>>) -> bool {
    let real = |g: &RigidityGroup| -> BTreeSet<Control> { t[g].iter().copied().filter(|c| *c != Control::None).collect() };
    let order = [
        RigidityGroup::G4IntraTeam,
        RigidityGroup::G3CrossTeam,
        RigidityGroup::G2CrossAbstraction,
        RigidityGroup::G1CrossCompany,
    ];
    order.windows(2).all(|w| real(&w[0]).is_subset(&real(&w[1])))
}

fn rigidity_nesting() -> Outcome {
    let default = ControlTable::default();
    ensure!(nested(default.declared()), "default table is not nested");
    ensure!(
        ControlTable::new(default.declared().clone()).is_ok(),
        "default table rejected"
    );
    let real: Vec<Control> = Control::ALL.into_iter().filter(|c| *c != Control::None).collect();
    let groups = [
        RigidityGroup::G1CrossCompany,
        RigidityGroup::G2CrossAbstraction,
        RigidityGroup::G3CrossTeam,
        RigidityGroup::G4IntraTeam,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut accepted, mut rejected) = (0, 0);
    for i in 0..50 {
        let mut table: BTreeMap<RigidityGroup, BTreeSet<Control>> = BTreeMap::new();
        if i % 2 == 0 {
            // grow a chain from G4 outwards, so about half the tables nest
            let mut acc: BTreeSet<Control> = BTreeSet::new();
            for g in groups.iter().rev() {
                for c in &real {
                    if rng.gen_bool(0.3) {
                        acc.insert(*c);
                    }
                }
                table.insert(*g, acc.clone());
            }
        } else {
            for g in groups {
                table.insert(g, real.iter().copied().filter(|_| rng.gen_bool(0.5)).collect());
            }
        }
        for set in table.values_mut() {
            if set.is_empty() {
                set.insert(Control::None);
            }
        }
        let expect = nested(&table);
        let direct = ControlTable::new(table.clone());
        let mut profile = serde_json::to_value(fixtures::maintenance_profile()).unwrap();
        profile["controls"] = serde_json::to_value(&table).unwrap();
        let loaded = QualityProfile::from_json(&profile.to_string());
        ensure!(direct.is_ok() == expect, "table {i}: constructor gave {direct:?}, nesting oracle {expect}");
        ensure!(loaded.is_ok() == expect, "table {i}: profile load gave {:?}, nesting oracle {expect}", loaded.err());
        if expect {
            accepted += 1;
        } else {
            rejected += 1;
        }
    }
    ensure!(accepted > 0 && rejected > 0, "random tables were all {}", if accepted > 0 { "nested" } else { "broken" });
    Ok(format!("default plus 50 random tables: {accepted} accepted, {rejected} rejected"))
}

// ---------------------------------------------------------------- 9

/// Every rule of every default profile, enabled.
fn full_suite() -> QualityProfile {
    let mut rules: Vec<RuleConfig> = Vec::new();
    for p in fixtures::default_profiles() {
        for r in p.rules {
            if !rules.iter().any(|x| x.check_id == r.check_id) {
                rules.push(RuleConfig { enabled: true, ..r });
            }
        }
    }
    QualityProfile {
        rules,
        ..fixtures::maintenance_profile()
    }
}

fn scale() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let build = Instant::now();
    let repo = synth::scale_repo(&mut rng, 50_000, 200_000, clock()).map_err(|e| e.to_string())?;
    let build = build.elapsed();
    let (artifacts, links) = (repo.artifacts().count(), repo.links().count());
    ensure!(artifacts == 50_000 && links == 200_000, "generated {artifacts} artifacts, {links} links");

    let profile = full_suite();
    let start = Instant::now();
    let report = quality::run_checks(&repo, None, &profile).map_err(|e| e.to_string())?;
    let checks = start.elapsed();
    ensure!(checks < Duration::from_secs(120), "check suite took {checks:?}");

    let mut slowest = Duration::ZERO;
    for lt in &repo.tim().link_types {
        let start = Instant::now();
        repo.related_pairs(&lt.name).map_err(|e| e.to_string())?;
        let t = start.elapsed();
        ensure!(t < Duration::from_secs(5), "related_pairs({}) took {t:?}", lt.name);
        slowest = slowest.max(t);
    }
    Ok(format!(
        "{artifacts} artifacts, {links} links built in {:.1}s; {} rules, {} findings in {:.1}s; slowest related_pairs {:.2}s",
        build.as_secs_f64(),
        profile.rules.len(),
        report.findings.len(),
        checks.as_secs_f64(),
        slowest.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 10

fn replay_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut total = 0;
    for round in 0..12 {
        let n = if round == 0 { 1000 } else { rng.gen_range(0..=1000) };
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path());
        let mut repo = store
            .init(fixtures::fig1_schema(), &fixtures::default_profiles(), clock())
            .map_err(|e| e.to_string())?;
        fixtures::register_users(&mut repo).unwrap();
        let ops = synth::random_ops(&mut rng, n);
        synth::run_session(&mut repo, &ops, &fixtures::maintenance_profile().versioning);
        store.save(&mut repo).map_err(|e| e.to_string())?;

        let in_memory = Repository::replay(repo.journal().to_vec(), clock()).map_err(|e| e.to_string())?;
        let from_disk = store.replay(clock()).map_err(|e| e.to_string())?;
        let loaded = store.load(clock()).map_err(|e| e.to_string())?;
        let h = repo.state_hash();
        ensure!(in_memory.state_hash() == h, "round {round}: in-memory replay differs");
        ensure!(from_disk.state_hash() == h, "round {round}: replay of journal.log differs");
        ensure!(loaded.state_hash() == h, "round {round}: loaded element files differ");
        total += n;
    }

    // a recorded CLI session replays to the same state on a fresh init
    let script: Vec<Vec<&str>> = vec![
        vec!["add", "Component", "ecu"],
        vec!["add", "Signal", "speed", "--attr", "data_type=Integer", "--scope", "horizontal-boundary"],
        vec!["link", "produces", "--from", "A1", "--to", "A2"],
        vec!["edit", "A2", "--title", "vehicle speed", "--major"],
        vec!["baseline", "r1"],
        vec!["edit", "A1", "--owner", "anna"],
    ];
    let hash = |cli: &Cli| Store::new(&cli.repo).load(clock()).unwrap().state_hash();
    let mut hashes = Vec::new();
    for _ in 0..2 {
        let mut cli = Cli::new();
        cli.run(&["init"]);
        cli.as_user("anna", "collision");
        for cmd in &script {
            let r = cli.run(cmd);
            ensure!(r.code == 0, "`{}` exited {}: {}", cmd.join(" "), r.code, r.err.trim());
        }
        let verify = cli.run(&["journal", "--verify"]);
        ensure!(verify.code == 0, "journal --verify failed: {}", verify.out);
        hashes.push(hash(&cli));
    }
    ensure!(hashes[0] == hashes[1], "re-running the CLI session gave a different state");
    Ok(format!("12 sessions, {total} operations; CLI session replayed"))
}
