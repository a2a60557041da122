use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use tracekit::change::{
    self, Adjustment, BoundaryKind, ImpactConfig, Window,
};
use tracekit::exchange;
use tracekit::journal::JournalFilter;
use tracekit::model::{ArtifactChanges, Attributes, AttrValue, LinkChanges, Scope, Status};
use tracekit::org;
use tracekit::quality::{self, Phase, QualityProfile, QualityReport};
use tracekit::select::Selector;
use tracekit::store::{LockGuard, Store};
use tracekit::tim::{self, AttributeKind, TimMigrationPlan, TimSchema};
use tracekit::versioning::{self, VersionOutcome};
use tracekit::{fixtures, ArtifactId, BaselineId, ChangeSet, Clock, Error, LinkId, Repository};

use crate::args::*;
use crate::render::{list, table};
use crate::{CliError, CliResult, EXIT_GATE, EXIT_OK};

struct Session<'a> {
    store: Store,
    clock: Clock,
    user: Option<String>,
    team: Option<String>,
    json: bool,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

pub fn dispatch(cli: Cli, env: &BTreeMap<String, String>, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    let clock = match &cli.clock {
        Some(s) => Clock::fixed_rfc3339(s).map_err(|e| CliError::Usage(format!("invalid --clock `{s}`: {e}")))?,
        None => Clock::System,
    };
    let given = |flag: &Option<String>, var: &str| {
        flag.clone()
            .or_else(|| env.get(var).cloned())
            .filter(|s| !s.is_empty())
    };
    let user = given(&cli.user, "TRACEKIT_USER");
    let team = given(&cli.team, "TRACEKIT_TEAM").or_else(|| user.clone());
    let mut s = Session {
        store: Store::new(&cli.repo),
        clock,
        user,
        team,
        json: cli.json,
        out,
        err,
    };
    match cli.command {
        Command::Init(a) => s.init(a),
        Command::Add(a) => s.add(a),
        Command::Edit(a) => s.edit(a),
        Command::Link(a) => s.link(a),
        Command::Map(a) => s.map(a),
        Command::ImportReqif(a) => s.import_reqif(a),
        Command::ExportReqif(a) => s.export_reqif(a),
        Command::Check(a) => s.check(a),
        Command::Assess(a) => s.assess(a),
        Command::Baseline(a) => s.baseline(a),
        Command::DiffBaselines(a) => s.diff_baselines(a),
        Command::Candidates(a) => s.candidates(a),
        Command::Promote(a) => s.promote(a),
        Command::Evolve(a) => s.evolve(a),
        Command::Tune(a) => s.tune(a),
        Command::Report(a) => s.report(a),
        Command::Journal(a) => s.journal(a),
    }
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e).into())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e).into())
}

/// Kebab-case name of a serde enum value.
fn name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

fn parse_scope(s: &str) -> CliResult<Scope> {
    Scope::parse(s).ok_or_else(|| CliError::Usage(format!("unknown scope `{s}`")))
}

fn parse_status(s: &str) -> CliResult<Status> {
    serde_json::from_value(Value::String(s.to_string()))
        .map_err(|_| CliError::Usage(format!("unknown status `{s}` (in-work, released)")))
}

fn split_pair<'s>(s: &'s str, what: &str) -> CliResult<(&'s str, &'s str)> {
    s.split_once('=')
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| CliError::Usage(format!("expected {what}, got `{s}`")))
}

/// `name=value` pairs, typed by the attribute definitions of `type_name`.
fn parse_attrs(schema: &TimSchema, type_name: &str, pairs: &[String]) -> CliResult<Attributes> {
    let def = schema.artifact_type(type_name);
    let mut out = Attributes::new();
    for p in pairs {
        let (k, v) = split_pair(p, "NAME=VALUE")?;
        let kind = def.and_then(|d| d.attribute(k)).map(|a| &a.kind);
        let value = match kind {
            Some(AttributeKind::Integer) => v.parse::<i64>().map(AttrValue::Integer).unwrap_or_else(|_| v.into()),
            Some(AttributeKind::Real) => v.parse::<f64>().map(AttrValue::Real).unwrap_or_else(|_| v.into()),
            _ => v.into(),
        };
        out.insert(k.to_string(), value);
    }
    Ok(out)
}

fn outcome(o: VersionOutcome) -> String {
    match o {
        VersionOutcome::UnchangedVersion => "version unchanged".into(),
        VersionOutcome::Bumped(v) => format!("new version {v}"),
    }
}

fn ids(v: &[String]) -> Vec<ArtifactId> {
    v.iter().map(|s| ArtifactId::new(s.as_str())).collect()
}

impl Session<'_> {
    fn emit<T: Serialize>(&mut self, value: &T, human: impl FnOnce() -> String) {
        if self.json {
            let text = serde_json::to_string_pretty(value).expect("output serializes");
            let _ = writeln!(self.out, "{text}");
        } else {
            let text = human();
            let _ = write!(self.out, "{text}");
            if !text.ends_with('\n') {
                let _ = writeln!(self.out);
            }
        }
    }

    fn warn(&mut self, msg: &str) {
        let _ = writeln!(self.err, "warning: {msg}");
    }

    /// Locks the repository and loads it; the lock lives as long as the guard.
    fn open(&self) -> CliResult<(LockGuard, Repository)> {
        let guard = self.store.lock()?;
        let repo = self.store.load(self.clock.clone())?;
        Ok((guard, repo))
    }

    fn change_set(&self, repo: &mut Repository, major: bool) -> CliResult<ChangeSet> {
        let user = self
            .user
            .as_deref()
            .ok_or_else(|| CliError::Usage("no acting user: pass --user or set TRACEKIT_USER".into()))?;
        let team = self.team.as_deref().unwrap_or(user);
        if repo.user(user).is_none() {
            return Err(Error::UnknownUser(user.to_string()).into());
        }
        Ok(repo.change_set(user, team).major(major))
    }

    fn profile(&self, phase: PhaseArg) -> CliResult<QualityProfile> {
        Ok(self.store.load_profile(phase.into())?)
    }

    fn init(&mut self, a: InitArgs) -> CliResult<i32> {
        let schema = match &a.schema {
            Some(p) => read_json::<TimSchema>(p)?,
            None => fixtures::fig1_schema(),
        };
        let errors = tim::validate_tim(&schema);
        if !errors.is_empty() {
            let msg: Vec<String> = errors.iter().map(|e| format!("{}: {}", e.element, e.message)).collect();
            return Err(Error::InvalidSchema(msg.join("; ")).into());
        }
        let mut repo = self.store.init(schema, &fixtures::default_profiles(), self.clock.clone())?;
        let _guard = self.store.lock()?;
        fixtures::register_users(&mut repo)?;
        let example = if a.example {
            Some(fixtures::build_running_example(&mut repo)?)
        } else {
            None
        };
        self.store.save(&mut repo)?;
        let root = self.store.root().display().to_string();
        let (schema_id, version) = (repo.tim().schema_id.clone(), repo.tim().schema_version);
        let artifacts = repo.artifacts().count();
        let value = json!({
            "repository": root,
            "schema_id": schema_id,
            "schema_version": version,
            "artifacts": artifacts,
            "example": example.as_ref().map(|e| e.all().map(|id| id.0.clone())),
        });
        self.emit(&value, || {
            format!("initialized {root} (schema {schema_id} v{version}, {artifacts} artifacts)")
        });
        Ok(EXIT_OK)
    }

    fn add(&mut self, a: AddArgs) -> CliResult<i32> {
        let (_guard, mut repo) = self.open()?;
        let scope = a.scope.as_deref().map(parse_scope).transpose()?;
        let attrs = parse_attrs(repo.tim(), &a.type_name, &a.attrs)?;
        let cs = self.change_set(&mut repo, false)?;
        let id = repo.create_artifact(&cs, &a.type_name, &a.title, attrs)?;
        if let Some(scope) = scope {
            repo.set_scope(&cs, &id, scope)?;
        }
        self.store.save(&mut repo)?;
        let art = repo.live_artifact(&id)?.clone();
        self.emit(&json!({ "id": id, "change_set": cs.id, "scope": art.scope }), || {
            format!("{id}  {} \"{}\" ({})", art.type_name, art.title, art.scope.as_str())
        });
        Ok(EXIT_OK)
    }

    fn edit(&mut self, a: EditArgs) -> CliResult<i32> {
        let (_guard, mut repo) = self.open()?;
        let profile = self.profile(a.phase)?;
        let cs = self.change_set(&mut repo, a.major)?;
        let status = a.status.as_deref().map(parse_status).transpose()?;
        let mut done: Vec<String> = Vec::new();

        let link = LinkId::new(a.id.as_str());
        if repo.link(&link).is_some() {
            if a.title.is_some() || a.scope.is_some() || a.retype.is_some() || a.owner.is_some() {
                return Err(CliError::Usage("links accept only --attr, --unset, --status, --refresh, --bump, --delete".into()));
            }
            if a.delete {
                repo.delete_link(&cs, &link)?;
                done.push("deleted".into());
            } else {
                let changes = LinkChanges {
                    set_attributes: parse_attrs(repo.tim(), "", &a.attrs)?,
                    remove_attributes: a.unset.clone(),
                    status,
                    refresh_endpoints: a.refresh,
                    request_bump: a.bump,
                };
                if changes == LinkChanges::default() {
                    return Err(CliError::Usage("nothing to change".into()));
                }
                done.push(outcome(repo.update_link(&cs, &link, changes, &profile.versioning)?));
            }
        } else {
            let id = ArtifactId::new(a.id.as_str());
            let type_name = repo.live_artifact(&id)?.type_name.clone();
            if a.refresh {
                return Err(CliError::Usage("--refresh applies to links".into()));
            }
            if a.delete {
                let removed = repo.delete_artifact(&cs, &id)?;
                done.push(format!("deleted with {} incident links", removed.len()));
            } else {
                if let Some(t) = &a.retype {
                    repo.retype_artifact(&cs, &id, t)?;
                    done.push(format!("retyped to {t}"));
                }
                if let Some(scope) = a.scope.as_deref().map(parse_scope).transpose()? {
                    let relinked = repo.set_scope(&cs, &id, scope)?;
                    done.push(format!("scope {} ({} links reclassified)", scope.as_str(), relinked.len()));
                }
                let type_for_attrs = a.retype.as_deref().unwrap_or(&type_name);
                let changes = ArtifactChanges {
                    title: a.title.clone(),
                    set_attributes: parse_attrs(repo.tim(), type_for_attrs, &a.attrs)?,
                    remove_attributes: a.unset.clone(),
                    status,
                    request_bump: a.bump,
                };
                if changes != ArtifactChanges::default() {
                    done.push(outcome(repo.update_artifact(&cs, &id, changes, &profile.versioning)?));
                }
                if let Some(owner) = &a.owner {
                    let affected: BTreeSet<String> = a.affected.iter().cloned().collect();
                    org::record_ownership(&mut repo, &cs, &id, owner, affected, &cs.team)?;
                    done.push(format!("owner {owner}"));
                }
                if done.is_empty() {
                    return Err(CliError::Usage("nothing to change".into()));
                }
            }
        }
        let propagated = org::propagate_org_update(&mut repo, &cs)?;
        self.store.save(&mut repo)?;
        let value = json!({
            "id": a.id,
            "change_set": cs.id,
            "changes": done,
            "ownership_updates": propagated,
        });
        self.emit(&value, || {
            let mut s = format!("{}: {}", a.id, done.join("; "));
            for r in &propagated {
                s.push_str(&format!("\n  affected users of {} now {}", r.artifact, list(&r.affected_users.iter().collect::<Vec<_>>())));
            }
            s
        });
        Ok(EXIT_OK)
    }

    fn link(&mut self, a: LinkArgs) -> CliResult<i32> {
        let (_guard, mut repo) = self.open()?;
        let check = self.profile(a.phase)?.link_type_check();
        let cs = self.change_set(&mut repo, false)?;
        let id = repo.create_link(&cs, &a.link_type, ids(&a.sources), ids(&a.targets), check)?;
        org::propagate_org_update(&mut repo, &cs)?;
        self.store.save(&mut repo)?;
        let l = repo.live_link(&id)?.clone();
        self.emit(&json!({ "id": id, "change_set": cs.id, "rigidity_group": l.rigidity_group }), || {
            format!(
                "{id}  {} {} -> {} ({})",
                l.link_type,
                list(&l.sources.iter().map(|s| s.as_str()).collect::<Vec<_>>()),
                list(&l.targets.iter().map(|s| s.as_str()).collect::<Vec<_>>()),
                name(&l.rigidity_group)
            )
        });
        Ok(EXIT_OK)
    }

    fn map(&mut self, a: MapArgs) -> CliResult<i32> {
        let (_guard, mut repo) = self.open()?;
        let check = self.profile(a.phase)?.link_type_check();
        let cs = self.change_set(&mut repo, false)?;
        let m = repo.create_mapped_link(
            &cs,
            &a.link_type,
            &ArtifactId::new(a.source.as_str()),
            &ArtifactId::new(a.target.as_str()),
            check,
        )?;
        org::propagate_org_update(&mut repo, &cs)?;
        self.store.save(&mut repo)?;
        self.emit(&m, || {
            format!(
                "{}  mapping object for {} -> {} (links {}, {})",
                m.mapping, a.source, a.target, m.source_link, m.target_link
            )
        });
        Ok(EXIT_OK)
    }

    fn import_reqif(&mut self, a: ImportArgs) -> CliResult<i32> {
        let text = read_file(&a.file)?;
        let (doc, warnings) = exchange::parse_reqif(&text)?;
        for w in &warnings {
            self.warn(&format!("{}:{}: skipped <{}>: {}", a.file.display(), w.line, w.element, w.message));
        }
        let (_guard, mut repo) = self.open()?;
        let cs = self.change_set(&mut repo, false)?;
        let rec = exchange::import_reqif(&mut repo, &cs, &doc)?;
        self.store.save(&mut repo)?;
        let value = json!({ "import": rec, "warnings": warnings });
        self.emit(&value, || {
            format!(
                "imported {}: {} created, {} new versions, {} updated, {} unchanged, {} relations",
                rec.document,
                rec.created.len(),
                rec.new_versions.len(),
                rec.updated.len(),
                rec.unchanged.len(),
                rec.relations.len()
            )
        });
        Ok(EXIT_OK)
    }

    fn export_reqif(&mut self, a: ExportArgs) -> CliResult<i32> {
        let selector = Selector::parse(&a.select)?;
        let (_guard, repo) = self.open()?;
        let created = repo.clock().now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        let doc = exchange::export_reqif(&repo, &selector, &a.identifier, &created)?;
        fs::write(&a.file, exchange::write_reqif(&doc)).map_err(|e| Error::io(&a.file, e))?;
        let value = json!({
            "file": a.file.display().to_string(),
            "spec_objects": doc.spec_objects.len(),
            "spec_relations": doc.spec_relations.len(),
        });
        self.emit(&value, || {
            format!(
                "wrote {} ({} objects, {} relations)",
                a.file.display(),
                doc.spec_objects.len(),
                doc.spec_relations.len()
            )
        });
        Ok(EXIT_OK)
    }

    fn check(&mut self, a: CheckArgs) -> CliResult<i32> {
        let (_guard, repo) = self.open()?;
        let profile = self.profile(a.phase)?;
        let baseline = a.baseline.as_deref().map(BaselineId::new);
        let report = quality::run_checks(&repo, baseline.as_ref(), &profile)?;
        self.store.save_report(&report)?;
        for n in &report.notices {
            self.warn(n);
        }
        self.emit(&report, || render_report(&report, &profile));
        Ok(if report.passed { EXIT_OK } else { EXIT_GATE })
    }

    fn assess(&mut self, a: PhaseArgs) -> CliResult<i32> {
        let _guard = self.store.lock()?;
        let profile = self.profile(a.phase)?;
        let report = self.store.load_report(a.phase.into())?;
        let decision = quality::assess(&report, &profile)?;
        self.emit(&decision, || {
            let rows: Vec<Vec<String>> = decision
                .blocking
                .iter()
                .map(|f| vec![f.severity.to_string(), f.check_id.clone(), list(&f.subject_ids), f.message.clone()])
                .collect();
            let verdict = if decision.passed { "PASSED" } else { "FAILED" };
            let mut s = format!("gate {verdict} ({} r{}, gate at {})\n", profile.phase, profile.revision, decision.gate);
            if !rows.is_empty() {
                s.push_str(&table(&["severity", "check", "subjects", "message"], &rows));
            }
            s
        });
        Ok(if decision.passed { EXIT_OK } else { EXIT_GATE })
    }

    fn baseline(&mut self, a: BaselineArgs) -> CliResult<i32> {
        let selector = Selector::parse(&a.select)?;
        let (_guard, mut repo) = self.open()?;
        let cs = self.change_set(&mut repo, false)?;
        let b = versioning::create_baseline(&mut repo, &cs, &a.name, &selector)?;
        self.store.save(&mut repo)?;
        self.emit(&b, || {
            format!(
                "{}  \"{}\" ({} artifacts, {} links)",
                b.id,
                b.name,
                b.artifact_versions.len(),
                b.link_versions.len()
            )
        });
        Ok(EXIT_OK)
    }

    fn diff_baselines(&mut self, a: DiffArgs) -> CliResult<i32> {
        let (_guard, repo) = self.open()?;
        let b1 = repo.baseline(&BaselineId::new(a.from.as_str()))?;
        let b2 = repo.baseline(&BaselineId::new(a.to.as_str()))?;
        let delta = versioning::compare_baselines(b1, b2);
        self.emit(&delta, || {
            if delta.is_empty() {
                return format!("{} and {} are identical", a.from, a.to);
            }
            let mut rows: Vec<Vec<String>> = Vec::new();
            rows.extend(delta.added.iter().map(|id| vec!["added".into(), id.clone(), String::new()]));
            rows.extend(delta.removed.iter().map(|id| vec!["removed".into(), id.clone(), String::new()]));
            rows.extend(
                delta
                    .version_changed
                    .iter()
                    .map(|(id, v1, v2)| vec!["version".into(), id.clone(), format!("v{v1} -> v{v2}")]),
            );
            table(&["change", "id", "versions"], &rows)
        });
        Ok(EXIT_OK)
    }

    fn candidates(&mut self, a: CandidateArgs) -> CliResult<i32> {
        let (_guard, repo) = self.open()?;
        let profile = self.profile(a.phase)?;
        let window = match (a.since, a.until) {
            (None, None) => profile.change_detection.window.map(|(s, u)| Window::new(s, u)).transpose()?,
            (s, u) => Some(Window::new(s.unwrap_or(0), u.unwrap_or(u64::MAX))?),
        };
        let threshold = a.threshold.unwrap_or(profile.change_detection.boundary_team_threshold);
        let stats = change::mine_cochanges(repo.journal(), window);
        let found = change::detect_boundary_candidates(&repo, &stats, threshold)?;
        let rows: Vec<Value> = found
            .iter()
            .map(|c| {
                let a = repo.artifact(&c.artifact);
                json!({
                    "artifact": c.artifact,
                    "title": a.map(|a| a.title.clone()),
                    "type": a.map(|a| a.type_name.clone()),
                    "distinct_teams": c.distinct_teams,
                    "change_sets": c.change_sets,
                    "suggested_owner": org::suggest_owner(&repo, &c.artifact).first(),
                })
            })
            .collect();
        let value = json!({ "threshold": threshold, "window": window, "candidates": rows });
        self.emit(&value, || {
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let s = |k: &str| r[k].as_str().unwrap_or("-").to_string();
                    vec![s("artifact"), s("type"), s("title"), r["distinct_teams"].to_string(), s("suggested_owner")]
                })
                .collect();
            format!(
                "{} candidates touched by at least {threshold} teams\n{}",
                body.len(),
                table(&["id", "type", "title", "teams", "owner"], &body)
            )
        });
        Ok(EXIT_OK)
    }

    fn promote(&mut self, a: PromoteArgs) -> CliResult<i32> {
        let (_guard, mut repo) = self.open()?;
        let mut profile = self.profile(a.phase)?;
        let before = profile.revision;
        let cs = self.change_set(&mut repo, false)?;
        let kind = match a.kind {
            KindArg::Horizontal => BoundaryKind::Horizontal,
            KindArg::Vertical => BoundaryKind::Vertical,
        };
        let report = change::promote_to_boundary(&mut repo, &cs, &ArtifactId::new(a.id.as_str()), kind, &mut profile)?;
        self.store.save(&mut repo)?;
        if profile.revision != before {
            self.store.save_profile(&profile)?;
        }
        self.emit(&report, || {
            format!(
                "{} is now {}\n  versioning: {} -> {}\n  activated checks: {}\n  reclassified links: {}\n  required controls: {}\n  owner suggestions: {}\n  {}\n  profile {} revision {}",
                report.artifact,
                report.scope.as_str(),
                report.policy_before.as_str(),
                report.policy_after.as_str(),
                list(&report.activated_checks),
                list(&report.reclassified_links.iter().map(|l| l.as_str()).collect::<Vec<_>>()),
                list(&report.required_controls.iter().map(name).collect::<Vec<_>>()),
                list(&report.owner_suggestions),
                report.recommendation,
                profile.phase,
                report.profile_revision
            )
        });
        Ok(EXIT_OK)
    }

    fn evolve(&mut self, a: EvolveArgs) -> CliResult<i32> {
        let (_guard, mut repo) = self.open()?;
        let plan: TimMigrationPlan = match (&a.plan, &a.schema) {
            (Some(p), _) => read_json(p)?,
            (None, Some(p)) => tim::diff_tim(repo.tim(), &read_json::<TimSchema>(p)?)?,
            (None, None) => unreachable!("clap requires one of --plan, --schema"),
        };
        let cs = self.change_set(&mut repo, true)?;
        let report = change::apply_migration(&mut repo, &cs, &plan)?;
        self.store.save(&mut repo)?;
        self.emit(&report, || {
            format!(
                "schema v{} -> v{}\n  ops: {}\n  created: {}\n  deleted: {}\n  retyped: {}\n  reclassified: {}",
                report.from_version,
                report.to_version,
                list(&report.ops),
                list(&report.created),
                list(&report.deleted),
                list(&report.retyped),
                list(&report.reclassified)
            )
        });
        Ok(EXIT_OK)
    }

    fn tune(&mut self, a: TuneArgs) -> CliResult<i32> {
        let mut adjustments: Vec<Adjustment> = match &a.adjust {
            Some(p) => read_json(p)?,
            None => vec![],
        };
        for s in &a.severity {
            let (check_id, severity) = split_pair(s, "CHECK=SEVERITY")?;
            adjustments.push(Adjustment::Severity {
                check_id: check_id.into(),
                severity: severity.into(),
            });
        }
        for (ids, enabled) in [(&a.enable, true), (&a.disable, false)] {
            adjustments.extend(ids.iter().map(|c| Adjustment::Enabled {
                check_id: c.clone(),
                enabled,
            }));
        }
        for p in &a.policy {
            let (selector, mode) = p
                .rsplit_once('=')
                .ok_or_else(|| CliError::Usage(format!("expected SELECTOR=MODE, got `{p}`")))?;
            adjustments.push(Adjustment::Policy {
                selector: (selector != "default").then(|| selector.to_string()),
                mode: mode.into(),
            });
        }
        if adjustments.is_empty() {
            return Err(CliError::Usage("no adjustments given".into()));
        }
        let _guard = self.store.lock()?;
        let profile = self.profile(a.phase)?;
        let next = change::tune_profile(&profile, &adjustments)?;
        if next.revision != profile.revision {
            self.store.save_profile(&next)?;
        }
        let value = json!({ "phase": next.phase, "revision_before": profile.revision, "revision": next.revision, "profile": next });
        self.emit(&value, || {
            if next.revision == profile.revision {
                format!("{} profile unchanged (revision {})", next.phase, next.revision)
            } else {
                format!("{} profile revision {} -> {}", next.phase, profile.revision, next.revision)
            }
        });
        Ok(EXIT_OK)
    }

    fn report(&mut self, a: ReportArgs) -> CliResult<i32> {
        let _guard = self.store.lock()?;
        if let Some(phase) = a.phase {
            let report = self.store.load_report(phase.into())?;
            let profile = self.profile(phase)?;
            self.emit(&report, || render_report(&report, &profile));
            return Ok(EXIT_OK);
        }
        let repo = self.store.load(self.clock.clone())?;
        let overview = Overview::of(&repo);
        self.emit(&overview, || overview.render());
        Ok(EXIT_OK)
    }

    fn journal(&mut self, a: JournalArgs) -> CliResult<i32> {
        let (_guard, repo) = self.open()?;
        if a.verify {
            let replayed = self.store.replay(self.clock.clone())?;
            let (h1, h2) = (repo.state_hash(), replayed.state_hash());
            let ok = h1 == h2;
            self.emit(&json!({ "state_hash": h1, "replayed_hash": h2, "equal": ok }), || {
                format!("state {h1}\nreplay {h2}\n{}", if ok { "equal" } else { "DIFFERENT" })
            });
            return Ok(if ok { EXIT_OK } else { crate::EXIT_DATA });
        }
        if let Some(cs) = &a.impact {
            if repo.change_set_entries(cs).next().is_none() {
                return Err(Error::NotFound(cs.clone()).into());
            }
            let profile = self.store.load_profile(Phase::Development)?;
            let config = ImpactConfig {
                cochange_threshold: profile.change_detection.cochange_threshold,
                window: profile.change_detection.window.map(|(s, u)| Window::new(s, u)).transpose()?,
            };
            let impacted: Vec<String> = change::detect_impact(&repo, cs, &config).into_iter().collect();
            self.emit(&json!({ "change_set": cs, "impacted": impacted }), || {
                format!("{} elements possibly affected by {cs}: {}", impacted.len(), list(&impacted))
            });
            return Ok(EXIT_OK);
        }
        let filter = JournalFilter {
            actor: a.actor,
            team: a.by_team,
            subject: a.subject,
            since_seq: a.since,
        };
        let entries = repo.query_journal(&filter);
        if self.json {
            self.emit(&entries, String::new);
        } else {
            let rows: Vec<Vec<String>> = entries
                .iter()
                .map(|e| {
                    vec![
                        e.seq.to_string(),
                        e.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                        e.actor.clone(),
                        e.team.clone(),
                        e.change_set_id.clone(),
                        name(&e.op_kind),
                        list(&e.subject_ids),
                    ]
                })
                .collect();
            let text = table(&["seq", "time", "actor", "team", "change set", "op", "subjects"], &rows);
            self.emit(&(), || text);
        }
        Ok(EXIT_OK)
    }
}

fn render_report(report: &QualityReport, profile: &QualityProfile) -> String {
    let verdict = if report.passed { "PASSED" } else { "FAILED" };
    let mut s = format!(
        "{} checks on {} (profile r{}): {} findings, gate {verdict} at {}\n",
        report.phase,
        report.baseline,
        report.profile_revision,
        report.findings.len(),
        profile.gate
    );
    if !report.findings.is_empty() {
        let rows: Vec<Vec<String>> = report
            .findings
            .iter()
            .map(|f| vec![f.severity.to_string(), f.check_id.clone(), list(&f.subject_ids), f.message.clone()])
            .collect();
        s.push_str(&table(&["severity", "check", "subjects", "message"], &rows));
    }
    if !report.metrics.is_empty() {
        let rows: Vec<Vec<String>> = report
            .metrics
            .iter()
            .map(|(k, v)| vec![k.clone(), v.percent(), v.to_string()])
            .collect();
        s.push_str(&table(&["metric", "coverage", "ratio"], &rows));
    }
    s
}

#[derive(Serialize)]
struct Overview {
    schema_id: String,
    schema_version: u64,
    artifacts: BTreeMap<String, usize>,
    links: BTreeMap<String, usize>,
    rigidity: BTreeMap<String, usize>,
    boundary_objects: Vec<BoundaryRow>,
    baselines: usize,
    journal_entries: usize,
    state_hash: String,
}

#[derive(Serialize)]
struct BoundaryRow {
    id: String,
    title: String,
    scope: String,
    owner: Option<String>,
    affected_users: Vec<String>,
}

impl Overview {
    fn of(repo: &Repository) -> Overview {
        let mut artifacts = BTreeMap::new();
        for a in repo.artifacts() {
            *artifacts.entry(a.type_name.clone()).or_insert(0) += 1;
        }
        let mut links = BTreeMap::new();
        let mut rigidity = BTreeMap::new();
        for l in repo.links() {
            *links.entry(l.link_type.clone()).or_insert(0) += 1;
            *rigidity.entry(name(&l.rigidity_group)).or_insert(0) += 1;
        }
        let boundary_objects = repo
            .artifacts()
            .filter(|a| a.scope.is_boundary())
            .map(|a| BoundaryRow {
                id: a.id.0.clone(),
                title: a.title.clone(),
                scope: a.scope.as_str().into(),
                owner: a.ownership.as_ref().map(|o| o.responsible.clone()),
                affected_users: a
                    .ownership
                    .as_ref()
                    .map(|o| o.affected_users.iter().cloned().collect())
                    .unwrap_or_default(),
            })
            .collect();
        Overview {
            schema_id: repo.tim().schema_id.clone(),
            schema_version: repo.tim().schema_version,
            artifacts,
            links,
            rigidity,
            boundary_objects,
            baselines: repo.baselines().count(),
            journal_entries: repo.journal().len(),
            state_hash: repo.state_hash(),
        }
    }

    fn render(&self) -> String {
        let counts = |m: &BTreeMap<String, usize>| -> Vec<Vec<String>> {
            m.iter().map(|(k, v)| vec![k.clone(), v.to_string()]).collect()
        };
        let mut s = format!("schema {} v{}\n\n", self.schema_id, self.schema_version);
        s.push_str(&table(&["artifact type", "count"], &counts(&self.artifacts)));
        s.push('\n');
        s.push_str(&table(&["link type", "count"], &counts(&self.links)));
        s.push('\n');
        s.push_str(&table(&["rigidity", "links"], &counts(&self.rigidity)));
        s.push('\n');
        let rows: Vec<Vec<String>> = self
            .boundary_objects
            .iter()
            .map(|b| {
                vec![
                    b.id.clone(),
                    b.title.clone(),
                    b.scope.clone(),
                    b.owner.clone().unwrap_or_else(|| "-".into()),
                    list(&b.affected_users),
                ]
            })
            .collect();
        s.push_str(&table(&["boundary object", "title", "scope", "owner", "affected"], &rows));
        s.push_str(&format!(
            "\n{} baselines, {} journal entries, state {}\n",
            self.baselines, self.journal_entries, self.state_hash
        ));
        s
    }
}
