//! Artifact selector queries.
//!
//! A query is a whitespace-separated list of `key=value` terms; a term may
//! list alternatives as `key=a|b`. All terms must match. `all` (or an empty
//! query) selects every live artifact.
//!
//! Keys: `type`, `scope`, `team`, `status`, `id`, `area`.

use std::fmt;

use crate::error::{Error, Result};
use crate::ids::ArtifactId;
use crate::model::{Artifact, Scope, Status};
use crate::repo::Repository;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Key {
    Type,
    Scope,
    Team,
    Status,
    Id,
    Area,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Term {
    key: Key,
    values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Selector {
    source: String,
    terms: Vec<Term>,
}

impl Selector {
    pub fn all() -> Selector {
        Selector {
            source: "all".into(),
            terms: vec![],
        }
    }

    pub fn parse(query: &str) -> Result<Selector> {
        let trimmed = query.trim();
        if trimmed.is_empty() || trimmed == "all" {
            return Ok(Selector::all());
        }
        let bad = || Error::InvalidSelector(query.to_string());
        let mut terms = Vec::new();
        for part in trimmed.split_whitespace() {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            let key = match k {
                "type" => Key::Type,
                "scope" => Key::Scope,
                "team" => Key::Team,
                "status" => Key::Status,
                "id" => Key::Id,
                "area" => Key::Area,
                _ => return Err(bad()),
            };
            let values: Vec<String> = v.split('|').map(str::to_string).collect();
            if values.iter().any(String::is_empty) {
                return Err(bad());
            }
            match key {
                Key::Scope if values.iter().any(|s| Scope::parse(s).is_none()) => return Err(bad()),
                Key::Status if values.iter().any(|s| parse_status(s).is_none()) => {
                    return Err(bad())
                }
                _ => {}
            }
            terms.push(Term { key, values });
        }
        Ok(Selector {
            source: trimmed.to_string(),
            terms,
        })
    }

    pub fn matches(&self, repo: &Repository, a: &Artifact) -> bool {
        self.terms.iter().all(|t| {
            t.values.iter().any(|v| match t.key {
                Key::Type => a.type_name == *v,
                Key::Scope => Scope::parse(v) == Some(a.scope),
                Key::Team => a.team == *v,
                Key::Status => parse_status(v) == Some(a.status),
                Key::Id => a.id.as_str() == v,
                Key::Area => repo
                    .tim()
                    .artifact_type(&a.type_name)
                    .and_then(|d| serde_json::to_value(d.area).ok())
                    .is_some_and(|area| area == v.as_str()),
            })
        })
    }

    /// Ids of matching live artifacts in id order.
    pub fn select(&self, repo: &Repository) -> Vec<ArtifactId> {
        repo.artifacts()
            .filter(|a| self.matches(repo, a))
            .map(|a| a.id.clone())
            .collect()
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn parse_status(s: &str) -> Option<Status> {
    match s {
        "in-work" => Some(Status::InWork),
        "released" => Some(Status::Released),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::ids::Clock;

    #[test]
    fn parse_rejects_garbage() {
        for q in ["type", "colour=red", "scope=sideways", "type=", "status=done"] {
            assert!(Selector::parse(q).is_err(), "{q}");
        }
        assert_eq!(Selector::parse("  ").unwrap(), Selector::all());
    }

    #[test]
    fn terms_are_anded_and_values_ored() {
        let (repo, ex) = fixtures::running_example(Clock::default()).unwrap();
        let all = Selector::all().select(&repo);
        assert_eq!(all.len(), 8);
        let comps = Selector::parse("type=Component").unwrap().select(&repo);
        assert_eq!(comps, vec![ex.collision_controller.clone(), ex.brake_controller.clone()]);
        let both = Selector::parse("type=Component|Signal team=collision")
            .unwrap()
            .select(&repo);
        assert_eq!(both, vec![ex.signal.clone(), ex.collision_controller.clone()]);
        let vb = Selector::parse("scope=vertical-boundary").unwrap().select(&repo);
        assert_eq!(vb, vec![ex.safety_goal.clone(), ex.interface.clone()]);
        let design = Selector::parse("area=safety-analysis").unwrap().select(&repo);
        assert_eq!(design.len(), 3);
    }
}
