//! A digital object repository: objects with versioned datastreams and
//! disseminators, stored as METS documents, with behaviors bound to external
//! HTTP services through WSDL-style descriptors.

pub mod access;
pub mod demo;
pub mod error;
pub mod management;
pub mod metsio;
pub mod model;
pub mod repository;
pub mod servicedesc;
pub mod store;
pub mod xml;

pub use access::{BehaviorProfile, Dissemination};
pub use error::{Error, Result};
pub use management::{
    validate_integrity, DatastreamChange, DisseminatorSpec, IntegrityRule, IntegrityViolation, NewContent,
};
pub use model::{DigitalObject, ObjectKind, Pid, Timestamp};
pub use repository::{Repository, RepositoryConfig};
pub use store::{Store, StoreConfig};
