use super::object::split_version_suffix;
use super::{AuditAction, AuditRecord, DigitalObject, Timestamp};
use crate::error::Error;

/// A timestamped component version.
pub trait Versioned {
    fn version_id(&self) -> &str;
    fn created(&self) -> Timestamp;
}

/// Picks the version visible at `as_of` from a newest-first list.
///
/// Without `as_of` the newest version wins; otherwise the newest version
/// created at or before `as_of`.
pub fn select_version<V: Versioned>(versions: &[V], as_of: Option<Timestamp>) -> Result<&V, Error> {
    let Some(as_of) = as_of else {
        return versions.first().ok_or(Error::NoVersionAtTime { as_of: None });
    };
    // Newest-first ordering means the first hit is the answer.
    versions
        .iter()
        .find(|v| v.created() <= as_of)
        .ok_or(Error::NoVersionAtTime { as_of: Some(as_of) })
}

/// `"<id>.<max_n + 1>"`, or `"<id>.0"` for a component with no versions.
pub fn next_version_id<V: Versioned>(component_id: &str, versions: &[V]) -> String {
    let next = versions
        .iter()
        .filter_map(|v| split_version_suffix(v.version_id()))
        .filter(|(base, _)| *base == component_id)
        .map(|(_, n)| n + 1)
        .max()
        .unwrap_or(0);
    format!("{component_id}.{next}")
}

/// Appends an audit record numbered after the existing trail and bumps
/// `modified` to `now`.
pub fn append_audit<'a>(
    object: &'a mut DigitalObject,
    action: AuditAction,
    component_id: &str,
    responsible: &str,
    justification: &str,
    now: Timestamp,
) -> &'a AuditRecord {
    let record = AuditRecord {
        id: format!("audit{}", object.audit_trail.len() + 1),
        action,
        component_id: component_id.to_owned(),
        responsible: responsible.to_owned(),
        date: now,
        justification: justification.to_owned(),
    };
    object.audit_trail.push(record);
    object.modified = now;
    object.audit_trail.last().expect("just pushed")
}
