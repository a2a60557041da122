//! On-disk repository layout.
//!
//! ```text
//! <root>/tim.json
//!        users.json
//!        journal.log            one JSON entry per line, append-only
//!        artifacts/<id>.json
//!        links/<id>.json
//!        baselines/<id>.json
//!        profiles/<phase>.json  plus profiles/<phase>.r<rev>.json for superseded revisions
//!        reports/<phase>.json   last quality report per phase
//!        .lock
//! ```
//!
//! The element files are a cache of the journal: [`Store::load`] reads them,
//! [`Store::replay`] ignores them and rebuilds from `journal.log` alone.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ids::{is_url_safe, Clock};
use crate::journal::{self, ChangeJournalEntry};
use crate::org::User;
use crate::quality::{Phase, QualityProfile, QualityReport};
use crate::repo::{RepoState, Repository};
use crate::tim::TimSchema;

pub const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Writes through a temporary file so readers never see half a file.
fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_dir_json<T: DeserializeOwned>(dir: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    for p in paths {
        out.push(read_json(&p)?);
    }
    Ok(out)
}

/// Exclusive lock on a repository directory, released on drop.
#[derive(Debug)]
pub struct LockGuard {
    path: PathBuf,
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Store {
        Store { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn exists(&self) -> bool {
        self.root.join("tim.json").is_file()
    }

    /// Creates the directory layout, the schema entry and the default profiles.
    pub fn init(&self, schema: TimSchema, profiles: &[QualityProfile], clock: Clock) -> Result<Repository> {
        if self.exists() {
            return Err(Error::InvalidSchema(format!(
                "{} already holds a repository",
                self.root.display()
            )));
        }
        let mut repo = Repository::new(schema, clock)?;
        for dir in ["artifacts", "links", "baselines", "profiles"] {
            let p = self.root.join(dir);
            fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        for p in profiles {
            self.save_profile(p)?;
        }
        self.save(&mut repo)?;
        Ok(repo)
    }

    fn require(&self) -> Result<()> {
        if self.exists() {
            Ok(())
        } else {
            Err(Error::NotARepository(self.root.display().to_string()))
        }
    }

    pub fn lock(&self) -> Result<LockGuard> {
        self.require()?;
        let path = self.root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(LockGuard { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::Locked(path.display().to_string()))
            }
            Err(e) => Err(Error::io(&path, e)),
        }
    }

    pub fn read_journal(&self) -> Result<Vec<ChangeJournalEntry>> {
        self.require()?;
        let path = self.root.join("journal.log");
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry = serde_json::from_str(&line)
                .map_err(|e| Error::CorruptJournal(format!("line {}: {e}", i + 1)))?;
            out.push(entry);
        }
        Ok(out)
    }

    /// Loads the element files and the journal.
    pub fn load(&self, clock: Clock) -> Result<Repository> {
        self.require()?;
        let users: Vec<User> = read_json(&self.root.join("users.json"))?;
        let state = RepoState {
            tim: read_json(&self.root.join("tim.json"))?,
            users: users.into_iter().map(|u| (u.id.clone(), u)).collect(),
            artifacts: read_dir_json::<crate::model::Artifact>(&self.root.join("artifacts"))?
                .into_iter()
                .map(|a| (a.id.clone(), a))
                .collect(),
            links: read_dir_json::<crate::model::TraceLink>(&self.root.join("links"))?
                .into_iter()
                .map(|l| (l.id.clone(), l))
                .collect(),
            baselines: read_dir_json::<crate::versioning::Baseline>(&self.root.join("baselines"))?
                .into_iter()
                .map(|b| (b.id.clone(), b))
                .collect(),
        };
        Repository::from_parts(state, self.read_journal()?, clock)
    }

    /// Rebuilds the repository from `journal.log` alone.
    pub fn replay(&self, clock: Clock) -> Result<Repository> {
        Repository::replay(self.read_journal()?, clock)
    }

    /// Appends new journal entries and rewrites changed element files.
    pub fn save(&self, repo: &mut Repository) -> Result<()> {
        let path = self.root.join("journal.log");
        let new = &repo.journal()[repo.persisted_entries..];
        if !new.is_empty() || !path.exists() {
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(|e| Error::io(&path, e))?;
            let mut buf = String::new();
            for e in new {
                buf.push_str(&journal::to_line(e));
                buf.push('\n');
            }
            f.write_all(buf.as_bytes()).map_err(|e| Error::io(&path, e))?;
        }
        let dirty = std::mem::take(&mut repo.dirty);
        let state = repo.state();
        if dirty.tim || !self.root.join("tim.json").exists() {
            write_json(&self.root.join("tim.json"), &state.tim)?;
        }
        if dirty.users || !self.root.join("users.json").exists() {
            let users: Vec<&User> = state.users.values().collect();
            write_json(&self.root.join("users.json"), &users)?;
        }
        for id in &dirty.artifacts {
            write_json(&self.element_path("artifacts", id.as_str())?, &state.artifacts[id])?;
        }
        for id in &dirty.links {
            write_json(&self.element_path("links", id.as_str())?, &state.links[id])?;
        }
        for id in &dirty.baselines {
            write_json(&self.element_path("baselines", id.as_str())?, &state.baselines[id])?;
        }
        repo.persisted_entries = repo.journal().len();
        Ok(())
    }

    fn element_path(&self, dir: &str, id: &str) -> Result<PathBuf> {
        if !is_url_safe(id) {
            return Err(Error::InvalidSelector(format!("id `{id}` is not URL-safe")));
        }
        Ok(self.root.join(dir).join(format!("{id}.json")))
    }

    pub fn profile_path(&self, phase: Phase) -> PathBuf {
        self.root.join("profiles").join(format!("{}.json", phase.as_str()))
    }

    pub fn load_profile(&self, phase: Phase) -> Result<QualityProfile> {
        let path = self.profile_path(phase);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let p = QualityProfile::from_json(&text)?;
        if p.phase != phase {
            return Err(Error::InvalidProfile(format!(
                "{} declares phase {}",
                path.display(),
                p.phase
            )));
        }
        Ok(p)
    }

    /// Writes a profile; a superseded revision is kept as `<phase>.r<rev>.json`.
    pub fn save_profile(&self, profile: &QualityProfile) -> Result<()> {
        let path = self.profile_path(profile.phase);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        if path.exists() {
            let old: QualityProfile = read_json(&path)?;
            if old.revision != profile.revision {
                let keep = path.with_file_name(format!("{}.r{}.json", old.phase.as_str(), old.revision));
                write_json(&keep, &old)?;
            }
        }
        write_json(&path, profile)
    }

    pub fn report_path(&self, phase: Phase) -> PathBuf {
        self.root.join("reports").join(format!("{}.json", phase.as_str()))
    }

    pub fn save_report(&self, report: &QualityReport) -> Result<()> {
        let path = self.report_path(report.phase);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        write_json(&path, report)
    }

    /// The last report saved for `phase`; `NotFound` if checks never ran.
    pub fn load_report(&self, phase: Phase) -> Result<QualityReport> {
        let path = self.report_path(phase);
        if !path.is_file() {
            return Err(Error::NotFound(format!("report for phase {phase}")));
        }
        read_json(&path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn clock() -> Clock {
        Clock::fixed_rfc3339("2021-05-01T08:00:00Z").unwrap()
    }

    #[test]
    fn init_save_load_and_replay_agree() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path());
        let mut repo = store
            .init(fixtures::fig1_schema(), &fixtures::default_profiles(), clock())
            .unwrap();
        fixtures::register_users(&mut repo).unwrap();
        fixtures::build_running_example(&mut repo).unwrap();
        store.save(&mut repo).unwrap();
        for sub in ["tim.json", "users.json", "journal.log", "artifacts/A1.json", "links/L1.json"] {
            assert!(dir.path().join(sub).exists(), "{sub}");
        }
        let loaded = store.load(clock()).unwrap();
        let replayed = store.replay(clock()).unwrap();
        assert_eq!(loaded.state_hash(), repo.state_hash());
        assert_eq!(replayed.state_hash(), repo.state_hash());
        assert_eq!(loaded.journal().len(), repo.journal().len());
    }

    #[test]
    fn journal_is_append_only_across_saves() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path());
        let mut repo = store.init(fixtures::fig1_schema(), &[], clock()).unwrap();
        let first = fs::read_to_string(dir.path().join("journal.log")).unwrap();
        fixtures::register_users(&mut repo).unwrap();
        fixtures::build_running_example(&mut repo).unwrap();
        store.save(&mut repo).unwrap();
        let second = fs::read_to_string(dir.path().join("journal.log")).unwrap();
        assert!(second.starts_with(&first));
        assert_eq!(second.lines().count(), repo.journal().len());
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path());
        store.init(fixtures::fig1_schema(), &[], clock()).unwrap();
        let guard = store.lock().unwrap();
        assert!(matches!(store.lock(), Err(Error::Locked(_))));
        drop(guard);
        assert!(store.lock().is_ok());
    }

    #[test]
    fn profiles_keep_superseded_revisions() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path());
        store
            .init(fixtures::fig1_schema(), &fixtures::default_profiles(), clock())
            .unwrap();
        let mut p = store.load_profile(Phase::Development).unwrap();
        assert_eq!(p, fixtures::development_profile());
        p.revision += 1;
        store.save_profile(&p).unwrap();
        assert_eq!(store.load_profile(Phase::Development).unwrap().revision, p.revision);
        assert!(dir.path().join("profiles/development.r1.json").exists());
    }

    #[test]
    fn missing_repository_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path().join("nope"));
        assert!(matches!(store.load(clock()), Err(Error::NotARepository(_))));
    }

    #[test]
    fn corrupt_journal_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path());
        store.init(fixtures::fig1_schema(), &[], clock()).unwrap();
        let mut f = OpenOptions::new()
            .append(true)
            .open(dir.path().join("journal.log"))
            .unwrap();
        writeln!(f, "{{not json").unwrap();
        assert!(matches!(store.replay(clock()), Err(Error::CorruptJournal(_))));
    }
}
