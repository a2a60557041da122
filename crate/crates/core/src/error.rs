use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown artifact type `{0}`")]
    UnknownType(String),

    #[error("unknown link type `{0}`")]
    UnknownLinkType(String),

    #[error("artifact `{artifact}` is missing required attribute `{attribute}`")]
    MissingRequiredAttribute { artifact: String, attribute: String },

    #[error("attribute `{attribute}` expects {expected}, got `{value}`")]
    AttributeKind {
        attribute: String,
        expected: String,
        value: String,
    },

    #[error("not found: `{0}`")]
    NotFound(String),

    #[error("`{id}` is frozen at version {version} in baseline `{baseline}`")]
    ImmutableInBaseline {
        id: String,
        version: u32,
        baseline: String,
    },

    #[error("`{id}` is released at version {version}; the active policy does not create a new version")]
    ReleasedImmutable { id: String, version: u32 },

    #[error("`{0}` is an imported external artifact and can only change through re-import")]
    ReadOnlyImported(String),

    #[error("dangling endpoint `{0}`")]
    DanglingEndpoint(String),

    #[error("link type `{link_type}` allows {arity} {side}, got {count}")]
    ArityViolation {
        link_type: String,
        side: &'static str,
        arity: &'static str,
        count: usize,
    },

    #[error("link type `{link_type}` does not permit {side} `{artifact}` of type `{artifact_type}`")]
    TypeMismatch {
        link_type: String,
        side: &'static str,
        artifact: String,
        artifact_type: String,
    },

    #[error("link type `{0}` is mediated by mapping objects; use a mapped link")]
    MappedLinkType(String),

    #[error("link type `{0}` is not a mapped link type")]
    NotMappedType(String),

    #[error("schema declares no mapping-object type")]
    NoMappingType,

    #[error("`{0}` cannot be retyped into or out of the mapping-object type")]
    MappingRetype(String),

    #[error("unknown user `{0}`")]
    UnknownUser(String),

    #[error("schemas are incomparable: `{0}` vs `{1}`")]
    IncomparableSchemas(String, String),

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("selection is empty")]
    EmptySelection,

    #[error("baseline version conflict on {0:?}")]
    VersionConflict(Vec<String>),

    #[error("unknown baseline `{0}`")]
    UnknownBaseline(String),

    #[error("report was produced under a different profile ({0})")]
    ProfileMismatch(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("unknown check id `{0}`")]
    UnknownCheckId(String),

    #[error("invalid severity `{0}`")]
    InvalidSeverity(String),

    #[error("invalid versioning policy table: {0}")]
    InvalidPolicy(String),

    #[error("rigidity controls are not nested: {0}")]
    ControlsNotNested(String),

    #[error("invalid window: since {since} > until {until}")]
    InvalidWindow { since: u64, until: u64 },

    #[error("invalid threshold {0}: at least 2 teams are required")]
    InvalidThreshold(usize),

    #[error("`{0}` is already a boundary object")]
    AlreadyBoundary(String),

    #[error("`{0}` has scope {1} and cannot be promoted")]
    NotPromotable(String, String),

    #[error("migration plan does not match the active schema: {0}")]
    PlanSchemaMismatch(String),

    #[error("migration conflict: {0}")]
    MigrationConflict(String),

    #[error("parse error at line {line} in <{element}>: {message}")]
    ParseError {
        line: usize,
        element: String,
        message: String,
    },

    #[error("relation `{relation}` references unknown `{reference}`")]
    UnresolvedRelationRef { relation: String, reference: String },

    #[error("invalid selector `{0}`")]
    InvalidSelector(String),

    #[error("repository is locked by another process ({0})")]
    Locked(String),

    #[error("not a repository: {0}")]
    NotARepository(String),

    #[error("journal is inconsistent: {0}")]
    CorruptJournal(String),

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("malformed JSON in {path}: {message}")]
    Json { path: String, message: String },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }

    pub fn json(path: impl AsRef<std::path::Path>, err: serde_json::Error) -> Self {
        Error::Json {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}
