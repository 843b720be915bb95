//! API-M: ingest, versioned component mutation with audit, purge, export,
//! and referential-integrity validation.
//!
//! Every mutation runs on a clone of the stored object under the PID's write
//! lock, is validated (structure by construction, integrity explicitly), and
//! only then written. A rejected operation leaves the stored file untouched.

mod integrity;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::error::Error;
use crate::metsio::{decode_element, encode_object, encode_object_with_content};
use crate::model::{
    append_audit, next_version_id, AuditAction, AuditRecord, ComponentId, ContentLocation, DatastreamVersion,
    DigitalObject, Disseminator, DisseminatorVersion, ObjectKind, Pid, Timestamp,
};
use crate::repository::Repository;
use crate::xml;

pub use integrity::{validate_integrity, IntegrityRule, IntegrityViolation, Overlay, RepositoryView};

/// OBJID value asking the repository to mint a PID at ingest.
pub const NEW_PID_PLACEHOLDER: &str = "new";

/// Content for a new datastream version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NewContent {
    /// Bytes held by the repository.
    Internal(Vec<u8>),
    /// Absolute http(s) URL fetched at access time.
    External(String),
}

/// Changes for [`Repository::modify_datastream`]; unset fields carry over
/// from the newest version.
#[derive(Debug, Clone, Default)]
pub struct DatastreamChange {
    pub mime_type: Option<String>,
    pub content: Option<NewContent>,
}

#[derive(Debug, Clone)]
pub struct DisseminatorSpec {
    pub bdef_pid: Pid,
    pub bmech_pid: Pid,
    /// Binding key -> datastream id.
    pub binding_map: BTreeMap<String, String>,
}

fn component_id(id: &str) -> Result<ComponentId, Error> {
    ComponentId::new(id)
}

fn location_for(repo: &Repository, content: NewContent) -> Result<ContentLocation, Error> {
    match content {
        NewContent::Internal(bytes) => Ok(ContentLocation::Internal(repo.store.put_content(&bytes)?)),
        NewContent::External(url) => ContentLocation::external(&url).map_err(|_| {
            Error::Integrity(vec![IntegrityViolation {
                rule: IntegrityRule::BadLocation,
                subject: url.clone(),
                message: "external location is not an absolute http(s) URL".into(),
            }])
        }),
    }
}

fn check_mime(mime: &str) -> Result<(), Error> {
    let valid = mime.split_once('/').is_some_and(|(t, s)| {
        !t.is_empty() && !s.is_empty() && !mime.chars().any(|c| c.is_whitespace() || c.is_control())
    });
    if valid {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("invalid media type {mime:?}")))
    }
}

fn binding_map(spec: &DisseminatorSpec) -> Result<BTreeMap<String, ComponentId>, Error> {
    if spec.bdef_pid == spec.bmech_pid {
        return Err(Error::InvalidArgument(format!(
            "{} cannot be both the bdef and the bmech",
            spec.bdef_pid
        )));
    }
    spec.binding_map
        .iter()
        .map(|(k, v)| {
            if !crate::model::is_binding_key(k) {
                return Err(Error::InvalidArgument(format!("invalid binding key {k:?}")));
            }
            Ok((k.clone(), component_id(v)?))
        })
        .collect()
}

impl Repository {
    /// Accepts an externally created METS document as a new object.
    ///
    /// An absent OBJID or `OBJID="new"` mints a PID in the default namespace
    /// once the document has passed validation.
    pub fn ingest(&self, doc: &[u8], principal: &str, justification: &str) -> Result<Pid, Error> {
        let mut root = xml::parse(doc)?;
        let minting = match root.get("OBJID") {
            None => true,
            Some(v) => v == NEW_PID_PLACEHOLDER,
        };
        // Validate under a stand-in PID; the real one is minted only on success.
        let stand_in = Pid::new(&self.default_namespace, 0)?;
        if minting {
            root.attrs.retain(|a| !(a.ns.is_none() && a.local == "OBJID"));
            root = root.attr("OBJID", stand_in.to_string());
        }
        let (mut object, inline) = decode_element(&root)?;
        if !minting && object.pid.serial() == 0 {
            return Err(Error::InvalidPid(format!("{}: serial 0 is reserved", object.pid)));
        }

        let now = self.clock.now().max(object.latest_activity());
        append_audit(&mut object, AuditAction::Ingest, "", principal, justification, now);

        let _refs = self.reference_lock.read();
        let explicit_guard = if minting {
            None
        } else {
            let guard = self.store.lock(&object.pid);
            if self.store.object_path(&object.pid).exists() {
                return Err(Error::PidCollision(object.pid.clone()));
            }
            Some(guard)
        };

        let checked = Arc::new(object);
        let view = Overlay::new(self).with_object(Arc::clone(&checked)).with_content(inline.iter().cloned());
        let violations = validate_integrity(&checked, &view);
        if !violations.is_empty() {
            return Err(Error::Integrity(violations));
        }
        drop(view);
        let mut object = Arc::unwrap_or_clone(checked);

        let _guard = match explicit_guard {
            Some(g) => {
                self.store.registry().observe(&object.pid)?;
                g
            }
            None => {
                object.pid = self.store.mint_pid(&self.default_namespace)?;
                self.store.lock(&object.pid)
            }
        };
        for (_, bytes) in &inline {
            self.store.put_content(bytes)?;
        }
        self.store.put_object(&object)?;
        let pid = object.pid.clone();
        log::info!("ingested {pid} ({}) for {principal}", object.kind);
        Ok(pid)
    }

    /// Runs `change` on a copy of the object and commits it if the result
    /// passes integrity validation, along with any objects depending on it.
    fn mutate<T>(
        &self,
        pid: &Pid,
        change: impl FnOnce(&mut DigitalObject, Timestamp) -> Result<T, Error>,
    ) -> Result<T, Error> {
        // Surrogate edits can invalidate other objects, so they exclude every
        // other commit; data-object edits only exclude surrogate edits and purges.
        let surrogate = self.store.kind_of(pid).is_some_and(|k| k != ObjectKind::Data);
        let _exclusive = surrogate.then(|| self.reference_lock.write());
        let _shared = (!surrogate).then(|| self.reference_lock.read());
        let _guard = self.store.lock(pid);
        let mut object = (*self.store.get_object(pid)?).clone();
        let now = self.clock.now();
        if object.latest_activity() > now {
            return Err(Error::ClockSkew {
                pid: pid.clone(),
                id: String::new(),
                now,
            });
        }
        let out = change(&mut object, now)?;

        let object = Arc::new(object);
        let view = Overlay::new(self).with_object(Arc::clone(&object));
        let mut violations = validate_integrity(&object, &view);
        if surrogate {
            for dependent in self.dependents(pid)? {
                if let Ok(dep) = self.store.get_object(&dependent) {
                    violations.extend(validate_integrity(&dep, &view));
                }
            }
        }
        if !violations.is_empty() {
            return Err(Error::Integrity(violations));
        }
        self.store.put_object(&object)?;
        Ok(out)
    }

    /// Objects whose validity depends on `pid`: data objects with
    /// disseminators naming it, and mechanisms implementing it.
    pub fn dependents(&self, pid: &Pid) -> Result<Vec<Pid>, Error> {
        let mut out: BTreeSet<Pid> = self.store.dependents_of(pid).into_iter().collect();
        if self.store.kind_of(pid) == Some(ObjectKind::BehaviorDefinition) {
            for entry in self.store.list_objects(Some(ObjectKind::BehaviorMechanism), None) {
                let Ok(bmech) = self.store.get_object(&entry.pid) else { continue };
                if let Ok(b) = self.service_bindings(&bmech, None) {
                    if &b.implements_bdef == pid {
                        out.insert(entry.pid);
                    }
                }
            }
        }
        out.remove(pid);
        Ok(out.into_iter().collect())
    }

    pub fn add_datastream(
        &self,
        pid: &Pid,
        dsid: &str,
        mime_type: &str,
        content: NewContent,
        principal: &str,
        justification: &str,
    ) -> Result<String, Error> {
        let id = component_id(dsid)?;
        check_mime(mime_type)?;
        self.mutate(pid, |object, now| {
            if object.has_component(dsid) {
                return Err(Error::DuplicateComponent {
                    pid: pid.clone(),
                    id: dsid.to_owned(),
                });
            }
            let location = location_for(self, content)?;
            let audit_id = append_audit(object, AuditAction::AddDatastream, dsid, principal, justification, now).id.clone();
            let version_id = format!("{dsid}.0");
            object.datastreams.insert(
                id.clone(),
                crate::model::Datastream {
                    id,
                    versions: vec![DatastreamVersion {
                        version_id: version_id.clone(),
                        created: now,
                        mime_type: mime_type.to_owned(),
                        location,
                        audit_id,
                    }],
                },
            );
            Ok(version_id)
        })
    }

    /// Appends a new newest version; earlier versions stay as they are.
    pub fn modify_datastream(
        &self,
        pid: &Pid,
        dsid: &str,
        change: DatastreamChange,
        principal: &str,
        justification: &str,
    ) -> Result<String, Error> {
        if let Some(m) = &change.mime_type {
            check_mime(m)?;
        }
        self.mutate(pid, |object, now| {
            let ds = object.datastream(dsid).ok_or_else(|| Error::ComponentNotFound {
                pid: pid.clone(),
                id: dsid.to_owned(),
            })?;
            let newest = ds.newest();
            if newest.created >= now {
                return Err(Error::ClockSkew {
                    pid: pid.clone(),
                    id: dsid.to_owned(),
                    now,
                });
            }
            let version_id = next_version_id(dsid, &ds.versions);
            let mime_type = change.mime_type.unwrap_or_else(|| newest.mime_type.clone());
            let location = match change.content {
                Some(c) => location_for(self, c)?,
                None => newest.location.clone(),
            };
            let audit_id = append_audit(object, AuditAction::ModifyDatastream, dsid, principal, justification, now).id.clone();
            let ds = object.datastreams.get_mut(dsid).expect("checked above");
            ds.versions.insert(
                0,
                DatastreamVersion {
                    version_id: version_id.clone(),
                    created: now,
                    mime_type,
                    location,
                    audit_id,
                },
            );
            Ok(version_id)
        })
    }

    pub fn add_disseminator(
        &self,
        pid: &Pid,
        dissid: &str,
        spec: &DisseminatorSpec,
        principal: &str,
        justification: &str,
    ) -> Result<String, Error> {
        let id = component_id(dissid)?;
        let map = binding_map(spec)?;
        self.mutate(pid, |object, now| {
            if object.has_component(dissid) {
                return Err(Error::DuplicateComponent {
                    pid: pid.clone(),
                    id: dissid.to_owned(),
                });
            }
            let audit_id = append_audit(object, AuditAction::AddDisseminator, dissid, principal, justification, now).id.clone();
            let version_id = format!("{dissid}.0");
            object.disseminators.insert(
                id.clone(),
                Disseminator {
                    id,
                    versions: vec![DisseminatorVersion {
                        version_id: version_id.clone(),
                        created: now,
                        bdef_pid: spec.bdef_pid.clone(),
                        bmech_pid: spec.bmech_pid.clone(),
                        binding_map: map,
                        audit_id,
                    }],
                },
            );
            Ok(version_id)
        })
    }

    pub fn modify_disseminator(
        &self,
        pid: &Pid,
        dissid: &str,
        spec: &DisseminatorSpec,
        principal: &str,
        justification: &str,
    ) -> Result<String, Error> {
        let map = binding_map(spec)?;
        self.mutate(pid, |object, now| {
            let diss = object.disseminator(dissid).ok_or_else(|| Error::ComponentNotFound {
                pid: pid.clone(),
                id: dissid.to_owned(),
            })?;
            if diss.newest().created >= now {
                return Err(Error::ClockSkew {
                    pid: pid.clone(),
                    id: dissid.to_owned(),
                    now,
                });
            }
            let version_id = next_version_id(dissid, &diss.versions);
            let audit_id =
                append_audit(object, AuditAction::ModifyDisseminator, dissid, principal, justification, now).id.clone();
            let diss = object.disseminators.get_mut(dissid).expect("checked above");
            diss.versions.insert(
                0,
                DisseminatorVersion {
                    version_id: version_id.clone(),
                    created: now,
                    bdef_pid: spec.bdef_pid.clone(),
                    bmech_pid: spec.bmech_pid.clone(),
                    binding_map: map,
                    audit_id,
                },
            );
            Ok(version_id)
        })
    }

    /// Removes an object nothing else depends on. The PID is never reissued.
    pub fn purge_object(&self, pid: &Pid, principal: &str, justification: &str) -> Result<(), Error> {
        let _refs = self.reference_lock.write();
        let _guard = self.store.lock(pid);
        if !self.store.contains(pid) {
            return Err(Error::ObjectNotFound(pid.clone()));
        }
        let dependents = self.dependents(pid)?;
        if !dependents.is_empty() {
            return Err(Error::InUse {
                pid: pid.clone(),
                dependents,
            });
        }
        self.store.delete_object(pid)?;
        log::info!("purged {pid} for {principal}: {justification}");
        Ok(())
    }

    /// Canonical METS bytes of the stored object.
    pub fn export(&self, pid: &Pid) -> Result<Vec<u8>, Error> {
        Ok(encode_object(&*self.store.get_object(pid)?))
    }

    /// A self-contained export: internal datastream bytes travel inline, so
    /// the document can be ingested into another repository.
    pub fn export_with_content(&self, pid: &Pid) -> Result<Vec<u8>, Error> {
        let object = self.store.get_object(pid)?;
        encode_object_with_content(&object, |key| self.store.get_content(key))
    }

    pub fn audit_trail(&self, pid: &Pid) -> Result<Vec<AuditRecord>, Error> {
        Ok(self.store.get_object(pid)?.audit_trail.clone())
    }

    /// Integrity violations across every stored object.
    pub fn integrity_sweep(&self) -> Result<Vec<IntegrityViolation>, Error> {
        let mut out = Vec::new();
        for entry in self.store.list_objects(None, None) {
            let object = self.store.get_object(&entry.pid)?;
            out.extend(validate_integrity(&object, self));
        }
        Ok(out)
    }
}
