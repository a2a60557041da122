//! Random repositories and editing sessions on the reference schema, used
//! by property tests, the acceptance suite and the scale benchmark.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::fixtures;
use crate::ids::{ArtifactId, Clock, LinkId};
use crate::model::{ArtifactChanges, AttrValue, Attributes, LinkChanges, Scope, Status};
use crate::org;
use crate::repo::{ChangeSet, Repository, TypeCheck};
use crate::select::Selector;
use crate::versioning::{self, PolicyTable};

/// `(actor, team)` pairs matching [`fixtures::users`].
pub const TEAMS: [(&str, &str); 5] = [
    ("sam", "safety"),
    ("rachel", "function"),
    ("anna", "collision"),
    ("ben", "brake"),
    ("mia", "design"),
];

pub const CREATE_TYPES: [&str; 9] = [
    "Hazard",
    "HazardousEvent",
    "SafetyGoal",
    "Function",
    "FunctionalRequirement",
    "FunctionInterface",
    "Signal",
    "Component",
    "DesignNote",
];

pub const DIRECT_LINK_TYPES: [&str; 10] = [
    "results-in",
    "mitigates",
    "allocated-to",
    "produces",
    "consumes",
    "satisfies",
    "hazard-of",
    "specifies",
    "documents",
    "hyperlink",
];

/// One editing step. Indices pick among the live elements at the time the
/// step runs (modulo their count), so any sequence is executable.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Create { kind: usize, team: usize },
    Edit { target: usize, team: usize, bump: bool, release: bool, major: bool },
    Link { link_type: usize, sources: Vec<usize>, targets: Vec<usize>, team: usize },
    Map { a: usize, b: usize, team: usize },
    EditLink { target: usize, team: usize, refresh: bool, bump: bool },
    DeleteLink { target: usize, team: usize },
    DeleteArtifact { target: usize, team: usize },
    SetScope { target: usize, scope: usize, team: usize },
    Retype { target: usize, kind: usize, team: usize },
    Own { target: usize, owner: usize, team: usize },
    Baseline { team: usize },
}

pub fn random_op(rng: &mut impl Rng) -> Op {
    let team = rng.gen_range(0..TEAMS.len());
    let idx = |rng: &mut dyn rand::RngCore| rng.gen_range(0..1000usize);
    match rng.gen_range(0..100) {
        0..=24 => Op::Create { kind: rng.gen_range(0..CREATE_TYPES.len()), team },
        25..=44 => Op::Edit {
            target: idx(rng),
            team,
            bump: rng.gen_bool(0.3),
            release: rng.gen_bool(0.1),
            major: rng.gen_bool(0.3),
        },
        45..=64 => {
            let ns = rng.gen_range(1..=2);
            let nt = rng.gen_range(1..=3);
            Op::Link {
                link_type: rng.gen_range(0..DIRECT_LINK_TYPES.len()),
                sources: (0..ns).map(|_| idx(rng)).collect(),
                targets: (0..nt).map(|_| idx(rng)).collect(),
                team,
            }
        }
        65..=71 => Op::Map { a: idx(rng), b: idx(rng), team },
        72..=77 => Op::EditLink { target: idx(rng), team, refresh: rng.gen_bool(0.5), bump: rng.gen_bool(0.3) },
        78..=81 => Op::DeleteLink { target: idx(rng), team },
        82..=84 => Op::DeleteArtifact { target: idx(rng), team },
        85..=90 => Op::SetScope { target: idx(rng), scope: rng.gen_range(0..3), team },
        91..=93 => Op::Retype { target: idx(rng), kind: rng.gen_range(0..CREATE_TYPES.len()), team },
        94..=97 => Op::Own { target: idx(rng), owner: rng.gen_range(0..TEAMS.len()), team },
        _ => Op::Baseline { team },
    }
}

pub fn random_ops(rng: &mut impl Rng, n: usize) -> Vec<Op> {
    (0..n).map(|_| random_op(rng)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SessionStats {
    pub applied: usize,
    pub rejected: usize,
}

fn pick<T: Clone>(items: &[T], i: usize) -> Option<T> {
    (!items.is_empty()).then(|| items[i % items.len()].clone())
}

fn attributes_for(kind: &str, rng_value: usize) -> Attributes {
    let mut a = Attributes::new();
    match kind {
        "SafetyGoal" => {
            a.insert("ASIL".into(), ["QM", "A", "B", "C", "D"][rng_value % 5].into());
        }
        "FunctionInterface" | "Signal" => {
            a.insert("data_type".into(), ["Integer", "Real", "Boolean"][rng_value % 3].into());
        }
        _ => {}
    }
    a
}

/// Applies one op in its own change set. Errors are expected (frozen,
/// released, mistyped...) and must leave the repository unchanged.
pub fn apply_op(repo: &mut Repository, op: &Op, policies: &PolicyTable) -> Result<()> {
    let team_of = |t: usize| TEAMS[t % TEAMS.len()];
    let live: Vec<ArtifactId> = repo.artifacts().map(|a| a.id.clone()).collect();
    let links: Vec<LinkId> = repo.links().map(|l| l.id.clone()).collect();
    let missing = || crate::Error::NotFound("empty repository".into());
    match op {
        Op::Create { kind, team } => {
            let (actor, t) = team_of(*team);
            let cs = repo.change_set(actor, t);
            let kind = CREATE_TYPES[kind % CREATE_TYPES.len()];
            let title = format!("{kind} {}", live.len());
            repo.create_artifact(&cs, kind, &title, attributes_for(kind, live.len()))?;
        }
        Op::Edit { target, team, bump, release, major } => {
            let (actor, t) = team_of(*team);
            let cs = repo.change_set(actor, t).major(*major);
            let id = pick(&live, *target).ok_or_else(missing)?;
            let mut changes = ArtifactChanges::default().title(format!("edited by {}", cs.id));
            changes.request_bump = *bump;
            if *release {
                changes.status = Some(Status::Released);
            }
            repo.update_artifact(&cs, &id, changes, policies)?;
        }
        Op::Link { link_type, sources, targets, team } => {
            let (actor, t) = team_of(*team);
            let cs = repo.change_set(actor, t);
            let ends = |ix: &[usize]| -> Vec<ArtifactId> {
                let set: BTreeSet<ArtifactId> = ix.iter().filter_map(|i| pick(&live, *i)).collect();
                set.into_iter().collect()
            };
            let lt = DIRECT_LINK_TYPES[link_type % DIRECT_LINK_TYPES.len()];
            repo.create_link(&cs, lt, ends(sources), ends(targets), TypeCheck::Lenient)?;
        }
        Op::Map { a, b, team } => {
            let (actor, t) = team_of(*team);
            let cs = repo.change_set(actor, t);
            let a = pick(&live, *a).ok_or_else(missing)?;
            let b = pick(&live, *b).ok_or_else(missing)?;
            repo.create_mapped_link(&cs, "realizes", &a, &b, TypeCheck::Lenient)?;
        }
        Op::EditLink { target, team, refresh, bump } => {
            let (actor, t) = team_of(*team);
            let cs = repo.change_set(actor, t);
            let id = pick(&links, *target).ok_or_else(missing)?;
            let mut changes = LinkChanges {
                refresh_endpoints: *refresh,
                request_bump: *bump,
                ..Default::default()
            };
            changes
                .set_attributes
                .insert("note".into(), AttrValue::Text(format!("edited by {}", cs.id)));
            repo.update_link(&cs, &id, changes, policies)?;
        }
        Op::DeleteLink { target, team } => {
            let (actor, t) = team_of(*team);
            let cs = repo.change_set(actor, t);
            let id = pick(&links, *target).ok_or_else(missing)?;
            repo.delete_link(&cs, &id)?;
        }
        Op::DeleteArtifact { target, team } => {
            let (actor, t) = team_of(*team);
            let cs = repo.change_set(actor, t);
            let id = pick(&live, *target).ok_or_else(missing)?;
            repo.delete_artifact(&cs, &id)?;
        }
        Op::SetScope { target, scope, team } => {
            let (actor, t) = team_of(*team);
            let cs = repo.change_set(actor, t);
            let id = pick(&live, *target).ok_or_else(missing)?;
            let scope = [Scope::LocallyRelevant, Scope::HorizontalBoundary, Scope::VerticalBoundary][scope % 3];
            if repo.live_artifact(&id)?.scope == Scope::External {
                return Err(crate::Error::ReadOnlyImported(id.0));
            }
            repo.set_scope(&cs, &id, scope)?;
        }
        Op::Retype { target, kind, team } => {
            let (actor, t) = team_of(*team);
            let cs = repo.change_set(actor, t);
            let id = pick(&live, *target).ok_or_else(missing)?;
            repo.retype_artifact(&cs, &id, CREATE_TYPES[kind % CREATE_TYPES.len()])?;
        }
        Op::Own { target, owner, team } => {
            let (actor, t) = team_of(*team);
            let cs = repo.change_set(actor, t);
            let id = pick(&live, *target).ok_or_else(missing)?;
            let (owner, owner_team) = team_of(*owner);
            org::record_ownership(repo, &cs, &id, owner, BTreeSet::from([actor.to_string()]), owner_team)?;
        }
        Op::Baseline { team } => {
            let (actor, t) = team_of(*team);
            let cs = repo.change_set(actor, t);
            versioning::create_baseline(repo, &cs, &format!("bl {}", cs.id), &Selector::all())?;
        }
    }
    Ok(())
}

pub fn run_session(repo: &mut Repository, ops: &[Op], policies: &PolicyTable) -> SessionStats {
    let mut stats = SessionStats::default();
    for op in ops {
        match apply_op(repo, op, policies) {
            Ok(()) => stats.applied += 1,
            Err(_) => stats.rejected += 1,
        }
    }
    stats
}

/// Reference repository (schema and users) after a random session.
pub fn random_session(rng: &mut impl Rng, ops: usize, clock: Clock) -> Result<(Repository, SessionStats)> {
    let mut repo = fixtures::empty_repo(clock)?;
    let policies = fixtures::maintenance_profile().versioning;
    let ops = random_ops(rng, ops);
    let stats = run_session(&mut repo, &ops, &policies);
    Ok((repo, stats))
}

/// Interfaces, signals and components wired with `produces` (direct, up to
/// three targets), `realizes` (mapped) and a few hyperlinks.
pub fn random_graph(rng: &mut impl Rng, artifacts: usize, links: usize, clock: Clock) -> Result<Repository> {
    let mut repo = fixtures::empty_repo(clock)?;
    let mut by_kind: [Vec<ArtifactId>; 3] = Default::default();
    let kinds = ["FunctionInterface", "Signal", "Component"];
    for i in 0..artifacts {
        let k = if i < 3 { i } else { rng.gen_range(0..3) };
        let (actor, team) = *TEAMS.choose(rng).expect("non-empty");
        let cs = repo.change_set(actor, team);
        let id = repo.create_artifact(&cs, kinds[k], &format!("{} {i}", kinds[k]), attributes_for(kinds[k], i))?;
        by_kind[k].push(id);
    }
    let [interfaces, signals, components] = by_kind;
    let all: Vec<ArtifactId> = repo.artifacts().map(|a| a.id.clone()).collect();
    let mut made = 0;
    while made < links {
        let (actor, team) = *TEAMS.choose(rng).expect("non-empty");
        let cs = repo.change_set(actor, team);
        match rng.gen_range(0..10) {
            0..=4 => {
                let c = components.choose(rng).expect("seeded").clone();
                let n = rng.gen_range(1..=3.min(signals.len()));
                let ts: Vec<ArtifactId> = signals.choose_multiple(rng, n).cloned().collect();
                repo.create_link(&cs, "produces", vec![c], ts, TypeCheck::Enforce)?;
                made += 1;
            }
            5..=8 => {
                let i = interfaces.choose(rng).expect("seeded");
                let s = signals.choose(rng).expect("seeded");
                repo.create_mapped_link(&cs, "realizes", i, s, TypeCheck::Enforce)?;
                made += 2;
            }
            _ => {
                let a = all.choose(rng).expect("seeded").clone();
                let b = all.choose(rng).expect("seeded").clone();
                repo.create_link(&cs, "hyperlink", vec![a], vec![b], TypeCheck::Enforce)?;
                made += 1;
            }
        }
    }
    Ok(repo)
}

/// Large repository for timing: hazards, functions, interfaces, signals and
/// components, connected only by schema-conforming links. Both totals are
/// exact; a tenth of the links are role links, and their mapping objects
/// count towards `artifacts`.
pub fn scale_repo(rng: &mut impl Rng, artifacts: usize, links: usize, clock: Clock) -> Result<Repository> {
    let mapped = links / 20;
    let plain = artifacts.saturating_sub(mapped).max(5);
    let mut repo = fixtures::empty_repo(clock)?;
    let kinds = ["Hazard", "Function", "FunctionInterface", "Signal", "Component"];
    let mut by_kind: Vec<Vec<ArtifactId>> = vec![Vec::new(); kinds.len()];
    let per_team: Vec<ChangeSet> = TEAMS.iter().map(|(a, t)| repo.change_set(a, t)).collect();
    for i in 0..plain {
        let k = i % kinds.len();
        let cs = &per_team[i % per_team.len()];
        let id = repo.create_artifact(cs, kinds[k], &format!("{} {i}", kinds[k]), attributes_for(kinds[k], i))?;
        by_kind[k].push(id);
    }
    let pick = |rng: &mut dyn rand::RngCore, k: usize| by_kind[k][rng.gen_range(0..by_kind[k].len())].clone();
    for i in 0..links - 2 * mapped {
        let cs = &per_team[i % per_team.len()];
        let (lt, s, t) = match i % 9 {
            0..=3 => ("produces", 4, 3),
            4..=6 => ("consumes", 4, 3),
            _ => ("hazard-of", 0, 1),
        };
        repo.create_link(cs, lt, vec![pick(rng, s)], vec![pick(rng, t)], TypeCheck::Enforce)?;
    }
    for i in 0..mapped {
        let cs = &per_team[i % per_team.len()];
        repo.create_mapped_link(cs, "realizes", &pick(rng, 2), &pick(rng, 3), TypeCheck::Enforce)?;
    }
    Ok(repo)
}
