use std::io;

use crate::management::IntegrityViolation;
use crate::metsio::StructuralViolation;
use crate::model::{Pid, Timestamp};
use crate::servicedesc::DescriptorError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid PID: {0}")]
    InvalidPid(String),
    #[error("invalid timestamp {0:?}, expected YYYY-MM-DDThh:mm:ss")]
    InvalidTimestamp(String),
    #[error("invalid component id {0:?}")]
    InvalidComponentId(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("XML is not well-formed: {0}")]
    XmlParse(String),
    #[error("document violates the METS profile ({} violation(s))", .0.len())]
    Structural(Vec<StructuralViolation>),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error("referential integrity check failed ({} violation(s))", .0.len())]
    Integrity(Vec<IntegrityViolation>),

    #[error("object {0} not found")]
    ObjectNotFound(Pid),
    #[error("component {id} not found in {pid}")]
    ComponentNotFound { pid: Pid, id: String },
    #[error("content {0} not found")]
    ContentNotFound(String),
    #[error("no version exists at {}", .as_of.map(|t| t.to_string()).unwrap_or_else(|| "any time".into()))]
    NoVersionAtTime { as_of: Option<Timestamp> },
    #[error("{pid} does not subscribe to {bdef}")]
    NoSuchSubscription { pid: Pid, bdef: Pid },
    #[error("{bdef} defines no method {method:?}")]
    NoSuchMethod { bdef: Pid, method: String },
    #[error("no value for binding key {0}")]
    MissingBindingKey(String),
    #[error("missing required parameter {0}")]
    MissingRequiredParam(String),
    #[error("binding integrity error: {0}")]
    BindingIntegrity(String),
    /// Deliberately carries no URL: the message may reach API clients.
    #[error("external fetch failed: {}", match (.status, .timeout) {
        (Some(s), _) => format!("upstream status {s}"),
        (None, true) => "timed out".to_owned(),
        (None, false) => .detail.clone(),
    })]
    ExternalFetch {
        status: Option<u16>,
        timeout: bool,
        detail: String,
    },

    #[error("PID {0} already exists")]
    PidCollision(Pid),
    #[error("{pid} is still referenced by {}", join(.dependents))]
    InUse { pid: Pid, dependents: Vec<Pid> },
    #[error("{id} in {pid} already has a version at or after {now}; retry")]
    ClockSkew { pid: Pid, id: String, now: Timestamp },
    #[error("component {id} already exists in {pid}")]
    DuplicateComponent { pid: Pid, id: String },

    #[error("storage error ({context}): {source}")]
    Storage {
        context: String,
        #[source]
        source: io::Error,
    },
}

fn join(pids: &[Pid]) -> String {
    pids.iter().map(Pid::to_string).collect::<Vec<_>>().join(", ")
}

impl Error {
    pub fn storage(context: impl Into<String>, source: io::Error) -> Self {
        Error::Storage {
            context: context.into(),
            source,
        }
    }

    /// Stable machine-readable code, one per variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidPid(_) => "INVALID_PID",
            Error::InvalidTimestamp(_) => "INVALID_TIMESTAMP",
            Error::InvalidComponentId(_) => "INVALID_COMPONENT_ID",
            Error::InvalidArgument(_) => "INVALID_ARGUMENT",
            Error::XmlParse(_) => "XML_PARSE_ERROR",
            Error::Structural(_) => "STRUCTURAL_ERROR",
            Error::Descriptor(_) => "DESCRIPTOR_ERROR",
            Error::Integrity(_) => "INTEGRITY_ERROR",
            Error::ObjectNotFound(_) => "OBJECT_NOT_FOUND",
            Error::ComponentNotFound { .. } => "COMPONENT_NOT_FOUND",
            Error::ContentNotFound(_) => "CONTENT_NOT_FOUND",
            Error::NoVersionAtTime { .. } => "NO_VERSION_AT_TIME",
            Error::NoSuchSubscription { .. } => "NO_SUCH_SUBSCRIPTION",
            Error::NoSuchMethod { .. } => "NO_SUCH_METHOD",
            Error::MissingBindingKey(_) => "MISSING_BINDING_KEY",
            Error::MissingRequiredParam(_) => "MISSING_REQUIRED_PARAM",
            Error::BindingIntegrity(_) => "BINDING_INTEGRITY_ERROR",
            Error::ExternalFetch { .. } => "EXTERNAL_FETCH_ERROR",
            Error::PidCollision(_) => "PID_COLLISION",
            Error::InUse { .. } => "IN_USE",
            Error::ClockSkew { .. } => "CLOCK_SKEW",
            Error::DuplicateComponent { .. } => "DUPLICATE_COMPONENT",
            Error::Storage { .. } => "STORAGE_ERROR",
        }
    }

    pub fn is_not_found(&self) -> bool {
        matches!(
            self,
            Error::ObjectNotFound(_)
                | Error::ComponentNotFound { .. }
                | Error::ContentNotFound(_)
                | Error::NoVersionAtTime { .. }
                | Error::NoSuchSubscription { .. }
                | Error::NoSuchMethod { .. }
        )
    }
}
