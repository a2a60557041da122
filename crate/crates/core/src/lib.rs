//! Traceability repository engine.
//!
//! Stores typed, versioned artifacts and trace links under an evolvable
//! traceability information model (TIM). The crate is organised around one
//! in-memory [`Repository`] whose every mutation is recorded in an
//! append-only journal; the journal alone is sufficient to rebuild the
//! repository state.
//!
//! - [`tim`]: schema definition, validation and diffing
//! - [`repo`] / [`journal`]: artifact and link storage, change journal
//! - [`versioning`]: loose / mild / strict policies and baselines
//! - [`quality`]: the four data-quality check families and phase profiles
//! - [`org`]: users, ownership, rigidity classification
//! - [`change`]: impact detection, co-change mining, promotion, migration
//! - [`exchange`]: ReqIF subset import and export
//! - [`store`]: on-disk repository layout
//! - [`fixtures`] / [`synth`]: reference data and random generators

pub mod change;
pub mod error;
pub mod exchange;
pub mod fixtures;
pub mod ids;
pub mod journal;
pub mod model;
pub mod org;
pub mod quality;
pub mod repo;
pub mod select;
pub mod store;
pub mod synth;
pub mod tim;
pub mod versioning;

pub use error::{Error, Result};
pub use ids::{ArtifactId, BaselineId, Clock, LinkId, Timestamp};
pub use journal::{ChangeJournalEntry, JournalFilter, OpKind, Payload};
pub use model::{
    Artifact, ArtifactChanges, AttrValue, MappingRole, OwnershipRecord, RigidityGroup, Scope,
    Status, TraceLink,
};
pub use repo::{ChangeSet, Repository};
pub use tim::TimSchema;
