use std::fmt;

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};

/// UTC instant at second resolution.
pub type Timestamp = DateTime<Utc>;

macro_rules! string_id {
    ($name:ident, $prefix:literal) => {
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub(crate) fn from_seq(n: u64) -> Self {
                Self(format!(concat!($prefix, "{}"), n))
            }

            /// Sequence number encoded in a generated id, if this id was generated.
            pub(crate) fn seq(&self) -> Option<u64> {
                self.0.strip_prefix($prefix)?.parse().ok()
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(ArtifactId, "A");
string_id!(LinkId, "L");
string_id!(BaselineId, "B");

/// URL-safe: ASCII alphanumerics plus `-`, `_`, `.`, `~`.
pub fn is_url_safe(id: &str) -> bool {
    !id.is_empty()
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.' | b'~'))
}

/// Time source for journal timestamps.
#[derive(Debug, Clone, Default)]
pub enum Clock {
    #[default]
    System,
    Fixed(Timestamp),
}

impl Clock {
    pub fn now(&self) -> Timestamp {
        match self {
            Clock::System => Utc::now().trunc_subsecs(0),
            Clock::Fixed(t) => *t,
        }
    }

    pub fn fixed_rfc3339(s: &str) -> Result<Clock, chrono::ParseError> {
        let t = DateTime::parse_from_rfc3339(s)?.with_timezone(&Utc);
        Ok(Clock::Fixed(t.trunc_subsecs(0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_ids_roundtrip_their_sequence() {
        let id = ArtifactId::from_seq(42);
        assert_eq!(id.as_str(), "A42");
        assert_eq!(id.seq(), Some(42));
        assert_eq!(ArtifactId::new("SIG1").seq(), None);
        assert_eq!(LinkId::from_seq(7).as_str(), "L7");
    }

    #[test]
    fn url_safety() {
        assert!(is_url_safe("A12"));
        assert!(is_url_safe("req-1.2_x~"));
        assert!(!is_url_safe(""));
        assert!(!is_url_safe("a/b"));
        assert!(!is_url_safe("a b"));
    }

    #[test]
    fn fixed_clock_truncates_to_seconds() {
        let c = Clock::fixed_rfc3339("2020-03-01T10:00:00.750Z").unwrap();
        assert_eq!(c.now().to_rfc3339(), "2020-03-01T10:00:00+00:00");
    }
}
