use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::Error;
use crate::model::{ContentKey, ContentLocation, DigitalObject, ObjectKind, Pid, METHODMAP_DSID, SERVICEBINDINGS_DSID};
use crate::repository::Repository;
use crate::servicedesc::{parse_bindings, parse_method_map, MethodMap, ServiceBindings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IntegrityRule {
    BdefMissing,
    BmechMissing,
    KindMismatch,
    ImplementsMismatch,
    UnboundKey,
    DanglingBinding,
    ReservedDsMissing,
    /// A surrogate's reserved datastream does not parse as a descriptor.
    BadDescriptor,
    /// An internal datastream version points at a blob the store lacks.
    ContentMissing,
    /// An external location that is not an absolute http(s) URL.
    BadLocation,
}

impl IntegrityRule {
    pub const ALL: [IntegrityRule; 10] = [
        IntegrityRule::BdefMissing,
        IntegrityRule::BmechMissing,
        IntegrityRule::KindMismatch,
        IntegrityRule::ImplementsMismatch,
        IntegrityRule::UnboundKey,
        IntegrityRule::DanglingBinding,
        IntegrityRule::ReservedDsMissing,
        IntegrityRule::BadDescriptor,
        IntegrityRule::ContentMissing,
        IntegrityRule::BadLocation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IntegrityRule::BdefMissing => "BDEF_MISSING",
            IntegrityRule::BmechMissing => "BMECH_MISSING",
            IntegrityRule::KindMismatch => "KIND_MISMATCH",
            IntegrityRule::ImplementsMismatch => "IMPLEMENTS_MISMATCH",
            IntegrityRule::UnboundKey => "UNBOUND_KEY",
            IntegrityRule::DanglingBinding => "DANGLING_BINDING",
            IntegrityRule::ReservedDsMissing => "RESERVED_DS_MISSING",
            IntegrityRule::BadDescriptor => "BAD_DESCRIPTOR",
            IntegrityRule::ContentMissing => "CONTENT_MISSING",
            IntegrityRule::BadLocation => "BAD_LOCATION",
        }
    }
}

impl fmt::Display for IntegrityRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntegrityViolation {
    pub rule: IntegrityRule,
    /// `pid` or `pid/component-version`.
    pub subject: String,
    pub message: String,
}

impl IntegrityViolation {
    fn new(rule: IntegrityRule, subject: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            rule,
            subject: subject.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for IntegrityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.rule, self.subject, self.message)
    }
}

/// What integrity validation needs to see of the rest of the repository.
pub trait RepositoryView {
    fn object(&self, pid: &Pid) -> Result<Option<Arc<DigitalObject>>, Error>;
    fn content_exists(&self, key: &ContentKey) -> bool;
    /// Newest method map of a bdef.
    fn method_map(&self, bdef: &DigitalObject) -> Result<Arc<MethodMap>, Error>;
    /// Newest service bindings of a bmech.
    fn service_bindings(&self, bmech: &DigitalObject) -> Result<Arc<ServiceBindings>, Error>;
}

impl RepositoryView for Repository {
    fn object(&self, pid: &Pid) -> Result<Option<Arc<DigitalObject>>, Error> {
        match self.store.get_object(pid) {
            Ok(o) => Ok(Some(o)),
            Err(Error::ObjectNotFound(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn content_exists(&self, key: &ContentKey) -> bool {
        self.store.content().contains(key)
    }

    fn method_map(&self, bdef: &DigitalObject) -> Result<Arc<MethodMap>, Error> {
        Repository::method_map(self, bdef, None)
    }

    fn service_bindings(&self, bmech: &DigitalObject) -> Result<Arc<ServiceBindings>, Error> {
        Repository::service_bindings(self, bmech, None)
    }
}

/// A repository view with uncommitted objects and blobs layered on top.
pub struct Overlay<'a> {
    base: &'a Repository,
    objects: HashMap<Pid, Arc<DigitalObject>>,
    content: HashMap<ContentKey, Vec<u8>>,
}

impl<'a> Overlay<'a> {
    pub fn new(base: &'a Repository) -> Self {
        Self {
            base,
            objects: HashMap::new(),
            content: HashMap::new(),
        }
    }

    pub fn with_object(mut self, object: Arc<DigitalObject>) -> Self {
        self.objects.insert(object.pid.clone(), object);
        self
    }

    pub fn with_content(mut self, content: impl IntoIterator<Item = (ContentKey, Vec<u8>)>) -> Self {
        self.content.extend(content);
        self
    }

    fn pending_descriptor(&self, object: &DigitalObject, dsid: &str) -> Option<&[u8]> {
        match &object.datastream(dsid)?.newest().location {
            ContentLocation::Internal(k) => self.content.get(k).map(Vec::as_slice),
            ContentLocation::External(_) => None,
        }
    }
}

impl RepositoryView for Overlay<'_> {
    fn object(&self, pid: &Pid) -> Result<Option<Arc<DigitalObject>>, Error> {
        match self.objects.get(pid) {
            Some(o) => Ok(Some(Arc::clone(o))),
            None => RepositoryView::object(self.base, pid),
        }
    }

    fn content_exists(&self, key: &ContentKey) -> bool {
        self.content.contains_key(key) || self.base.content_exists(key)
    }

    fn method_map(&self, bdef: &DigitalObject) -> Result<Arc<MethodMap>, Error> {
        match self.pending_descriptor(bdef, METHODMAP_DSID) {
            Some(bytes) => Ok(Arc::new(parse_method_map(bytes)?)),
            None => RepositoryView::method_map(self.base, bdef),
        }
    }

    fn service_bindings(&self, bmech: &DigitalObject) -> Result<Arc<ServiceBindings>, Error> {
        match self.pending_descriptor(bmech, SERVICEBINDINGS_DSID) {
            Some(bytes) => Ok(Arc::new(parse_bindings(bytes)?)),
            None => RepositoryView::service_bindings(self.base, bmech),
        }
    }
}

fn descriptor_problem(e: &Error) -> String {
    match e {
        Error::Descriptor(d) => d.to_string(),
        other => other.to_string(),
    }
}

/// Looks up `pid` and checks it has kind `want`; reports `missing_rule` or
/// KIND_MISMATCH otherwise.
fn resolve_kind(
    view: &dyn RepositoryView,
    pid: &Pid,
    want: ObjectKind,
    missing_rule: IntegrityRule,
    subject: &str,
    out: &mut Vec<IntegrityViolation>,
) -> Option<Arc<DigitalObject>> {
    match view.object(pid) {
        Ok(Some(o)) if o.kind == want => Some(o),
        Ok(Some(o)) => {
            out.push(IntegrityViolation::new(
                IntegrityRule::KindMismatch,
                subject,
                format!("{pid} is a {}, expected {}", o.kind, want),
            ));
            None
        }
        Ok(None) => {
            out.push(IntegrityViolation::new(missing_rule, subject, format!("{pid} does not exist")));
            None
        }
        Err(e) => {
            out.push(IntegrityViolation::new(missing_rule, subject, format!("{pid} is unreadable: {e}")));
            None
        }
    }
}

/// Checks the Fedora referential-integrity rules for one object.
///
/// Existence, kind and binding-target rules hold for every disseminator
/// version; the implements and unbound-key rules compare only the newest
/// version against the mechanism's current descriptor, since older versions
/// were bound against descriptors that may since have been revised.
pub fn validate_integrity(object: &DigitalObject, view: &dyn RepositoryView) -> Vec<IntegrityViolation> {
    let mut out = Vec::new();
    let pid = object.pid.to_string();

    if let Some(dsid) = object.kind.reserved_datastream() {
        if object.datastream(dsid).is_none() {
            out.push(IntegrityViolation::new(
                IntegrityRule::ReservedDsMissing,
                &pid,
                format!("{} objects must carry {dsid}", object.kind),
            ));
        }
    }

    for ds in object.datastreams.values() {
        for v in &ds.versions {
            let subject = format!("{pid}/{}", v.version_id);
            match &v.location {
                ContentLocation::Internal(key) if !view.content_exists(key) => out.push(IntegrityViolation::new(
                    IntegrityRule::ContentMissing,
                    subject,
                    format!("no stored content {key}"),
                )),
                ContentLocation::External(url) if !crate::model::is_absolute_http_url(url) => {
                    out.push(IntegrityViolation::new(
                        IntegrityRule::BadLocation,
                        subject,
                        "external location is not an absolute http(s) URL",
                    ))
                }
                _ => {}
            }
        }
    }

    let has_reserved = |dsid| object.datastream(dsid).is_some();
    match object.kind {
        ObjectKind::BehaviorDefinition if has_reserved(METHODMAP_DSID) => {
            if let Err(e) = view.method_map(object) {
                out.push(IntegrityViolation::new(
                    IntegrityRule::BadDescriptor,
                    format!("{pid}/{METHODMAP_DSID}"),
                    descriptor_problem(&e),
                ));
            }
        }
        ObjectKind::BehaviorMechanism if has_reserved(SERVICEBINDINGS_DSID) => {
            check_mechanism(object, view, &mut out);
        }
        _ => {}
    }

    for diss in object.disseminators.values() {
        for (n, v) in diss.versions.iter().enumerate() {
            let subject = format!("{pid}/{}", v.version_id);
            for (key, target) in &v.binding_map {
                if object.datastream(target.as_str()).is_none() {
                    out.push(IntegrityViolation::new(
                        IntegrityRule::DanglingBinding,
                        &subject,
                        format!("{key} is bound to missing datastream {target}"),
                    ));
                }
            }
            let bdef = resolve_kind(
                view,
                &v.bdef_pid,
                ObjectKind::BehaviorDefinition,
                IntegrityRule::BdefMissing,
                &subject,
                &mut out,
            );
            let bmech = resolve_kind(
                view,
                &v.bmech_pid,
                ObjectKind::BehaviorMechanism,
                IntegrityRule::BmechMissing,
                &subject,
                &mut out,
            );
            if n > 0 || bdef.is_none() {
                continue;
            }
            let Some(bmech) = bmech else { continue };
            let bindings = match view.service_bindings(&bmech) {
                Ok(b) => b,
                Err(e) => {
                    out.push(IntegrityViolation::new(
                        IntegrityRule::BadDescriptor,
                        &subject,
                        format!("{}: {}", v.bmech_pid, descriptor_problem(&e)),
                    ));
                    continue;
                }
            };
            if bindings.implements_bdef != v.bdef_pid {
                out.push(IntegrityViolation::new(
                    IntegrityRule::ImplementsMismatch,
                    &subject,
                    format!("{} implements {}, not {}", v.bmech_pid, bindings.implements_bdef, v.bdef_pid),
                ));
                continue;
            }
            let mut required: Vec<&String> = bindings
                .bindings
                .values()
                .flat_map(|b| b.method.binding_keys.iter())
                .collect();
            required.sort();
            required.dedup();
            for key in required {
                if !v.binding_map.contains_key(key) {
                    out.push(IntegrityViolation::new(
                        IntegrityRule::UnboundKey,
                        &subject,
                        format!("{} requires binding key {key}", v.bmech_pid),
                    ));
                }
            }
        }
    }
    out
}

/// A mechanism must implement an existing bdef with exactly its methods.
fn check_mechanism(object: &DigitalObject, view: &dyn RepositoryView, out: &mut Vec<IntegrityViolation>) {
    let subject = format!("{}/{SERVICEBINDINGS_DSID}", object.pid);
    let bindings = match view.service_bindings(object) {
        Ok(b) => b,
        Err(e) => {
            out.push(IntegrityViolation::new(
                IntegrityRule::BadDescriptor,
                subject,
                descriptor_problem(&e),
            ));
            return;
        }
    };
    let Some(bdef) = resolve_kind(
        view,
        &bindings.implements_bdef,
        ObjectKind::BehaviorDefinition,
        IntegrityRule::BdefMissing,
        &subject,
        out,
    ) else {
        return;
    };
    match view.method_map(&bdef) {
        Ok(map) if map.same_signatures(&bindings.method_map()) => {}
        Ok(_) => out.push(IntegrityViolation::new(
            IntegrityRule::ImplementsMismatch,
            subject,
            format!("methods differ from those defined by {}", bdef.pid),
        )),
        Err(e) => out.push(IntegrityViolation::new(
            IntegrityRule::BadDescriptor,
            subject,
            format!("{}: {}", bdef.pid, descriptor_problem(&e)),
        )),
    }
}
