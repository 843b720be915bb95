//! Digital object model: identifiers, components, versions and audit records.
//!
//! Everything here is a plain value. Mutation happens on owned clones, so
//! readers holding an older `DigitalObject` never observe partial updates.

mod object;
mod pid;
mod time;
mod versioning;

pub use object::{
    is_absolute_http_url, is_binding_key, split_version_suffix, AuditAction, AuditRecord,
    ComponentId, ContentKey, ContentLocation, Control, Datastream, DatastreamVersion,
    DigitalObject, Disseminator, DisseminatorVersion, ObjectKind, METHODMAP_DSID,
    SERVICEBINDINGS_DSID,
};
pub use pid::{validate_namespace, Pid};
pub use time::{Clock, ManualClock, SystemClock, Timestamp};
pub use versioning::{append_audit, next_version_id, select_version, Versioned};
