//! API-A: reflection over an object's behaviors and mediated dissemination.
//!
//! A dissemination never reveals where it was produced: the mechanism's URL
//! stays inside this module, and callers receive only the content stream.

use std::collections::BTreeMap;
use std::io::Read;
use std::sync::Arc;

use serde::Serialize;

use crate::error::Error;
use crate::model::{select_version, DigitalObject, DisseminatorVersion, Pid, Timestamp};
use crate::repository::Repository;
use crate::servicedesc::{instantiate_binding, MethodDef};
use crate::store::ResolvedContent;

/// The methods an object offers through one behavior definition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BehaviorProfile {
    pub bdef_pid: Pid,
    pub methods: Vec<MethodDef>,
}

/// Result of running a disseminator method.
pub struct Dissemination {
    pub mime_type: String,
    /// Set when the mechanism answered with a type other than the one its
    /// binding promises. Never contains the mechanism's address.
    pub warning: Option<String>,
    pub body: Box<dyn Read + Send>,
}

impl Dissemination {
    pub fn into_bytes(mut self) -> Result<Vec<u8>, Error> {
        let mut buf = Vec::new();
        self.body.read_to_end(&mut buf).map_err(|e| Error::ExternalFetch {
            status: None,
            timeout: e.kind() == std::io::ErrorKind::TimedOut,
            detail: "response body interrupted".into(),
        })?;
        Ok(buf)
    }
}

impl std::fmt::Debug for Dissemination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dissemination")
            .field("mime_type", &self.mime_type)
            .field("warning", &self.warning)
            .finish_non_exhaustive()
    }
}

/// Media type without parameters, lowercased.
fn essence(mime: &str) -> String {
    mime.split(';').next().unwrap_or("").trim().to_ascii_lowercase()
}

fn mime_matches(expected: &str, actual: &str) -> bool {
    let (expected, actual) = (essence(expected), essence(actual));
    match expected.split_once('/') {
        _ if expected == "*/*" => true,
        Some((t, "*")) => actual.split_once('/').is_some_and(|(at, _)| at == t),
        _ => expected == actual,
    }
}

fn check_as_of(object: &DigitalObject, as_of: Option<Timestamp>) -> Result<(), Error> {
    match as_of {
        Some(t) if t < object.created => Err(Error::NoVersionAtTime { as_of }),
        _ => Ok(()),
    }
}

impl Repository {
    /// Behavior definitions the object subscribes to at `as_of`, sorted.
    pub fn get_behavior_def_types(&self, pid: &Pid, as_of: Option<Timestamp>) -> Result<Vec<Pid>, Error> {
        let object = self.store.get_object(pid)?;
        check_as_of(&object, as_of)?;
        let mut out: Vec<Pid> = object
            .disseminators
            .values()
            .filter_map(|d| select_version(&d.versions, as_of).ok())
            .map(|v| v.bdef_pid.clone())
            .collect();
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// The disseminator version through which `object` subscribes to `bdef`
    /// at `as_of`. A subscription that exists only at other times reports
    /// NoVersionAtTime rather than NoSuchSubscription.
    fn subscription<'a>(
        &self,
        object: &'a DigitalObject,
        bdef: &Pid,
        as_of: Option<Timestamp>,
    ) -> Result<&'a DisseminatorVersion, Error> {
        check_as_of(object, as_of)?;
        let live = object
            .disseminators
            .values()
            .filter_map(|d| select_version(&d.versions, as_of).ok())
            .find(|v| &v.bdef_pid == bdef);
        if let Some(v) = live {
            return Ok(v);
        }
        let ever = object
            .disseminators
            .values()
            .flat_map(|d| &d.versions)
            .any(|v| &v.bdef_pid == bdef);
        if ever {
            Err(Error::NoVersionAtTime { as_of })
        } else {
            Err(Error::NoSuchSubscription {
                pid: object.pid.clone(),
                bdef: bdef.clone(),
            })
        }
    }

    fn surrogate(&self, pid: &Pid) -> Result<Arc<DigitalObject>, Error> {
        self.store.get_object(pid).map_err(|e| match e {
            Error::ObjectNotFound(p) => Error::BindingIntegrity(format!("surrogate {p} is missing")),
            other => other,
        })
    }

    pub fn get_methods(&self, pid: &Pid, bdef_pid: &Pid, as_of: Option<Timestamp>) -> Result<BehaviorProfile, Error> {
        let object = self.store.get_object(pid)?;
        self.subscription(&object, bdef_pid, as_of)?;
        let bdef = self.surrogate(bdef_pid)?;
        let map = self.method_map(&bdef, as_of)?;
        Ok(BehaviorProfile {
            bdef_pid: bdef_pid.clone(),
            methods: map.methods.values().cloned().collect(),
        })
    }

    /// Runs `method` of `bdef_pid` on the object and streams the result.
    ///
    /// Every component involved (the disseminator, the bound datastreams and
    /// both surrogates' descriptors) is read as of `as_of`.
    pub fn get_dissemination(
        &self,
        pid: &Pid,
        bdef_pid: &Pid,
        method: &str,
        user_args: &BTreeMap<String, String>,
        as_of: Option<Timestamp>,
    ) -> Result<Dissemination, Error> {
        let object = self.store.get_object(pid)?;
        let version = self.subscription(&object, bdef_pid, as_of)?;

        let bdef = self.surrogate(bdef_pid)?;
        let methods = self.method_map(&bdef, as_of)?;
        let declared = methods.get(method).ok_or_else(|| Error::NoSuchMethod {
            bdef: bdef_pid.clone(),
            method: method.to_owned(),
        })?;
        if let Some(unknown) = user_args.keys().find(|k| declared.user_param(k).is_none()) {
            return Err(Error::InvalidArgument(format!("{method} takes no parameter {unknown}")));
        }

        let bmech = self.surrogate(&version.bmech_pid)?;
        let bindings = self.service_bindings(&bmech, as_of)?;
        if &bindings.implements_bdef != bdef_pid {
            return Err(Error::BindingIntegrity(format!(
                "{} implements {}, not {bdef_pid}",
                version.bmech_pid, bindings.implements_bdef
            )));
        }
        let binding = bindings.bindings.get(method).ok_or_else(|| {
            Error::BindingIntegrity(format!("{} has no binding for {method}", version.bmech_pid))
        })?;

        let mut key_values = BTreeMap::new();
        for key in &binding.method.binding_keys {
            let dsid = version
                .binding_map
                .get(key)
                .ok_or_else(|| Error::BindingIntegrity(format!("binding key {key} is unbound in {}", version.version_id)))?;
            let ds = object.datastream(dsid.as_str()).ok_or_else(|| {
                Error::BindingIntegrity(format!("{key} is bound to missing datastream {dsid}"))
            })?;
            select_version(&ds.versions, as_of)?;
            key_values.insert(key.clone(), self.datastream_url(pid, dsid.as_str(), as_of));
        }

        let request = instantiate_binding(binding, &key_values, user_args)?;
        let response = self.store.fetcher().fetch(request.verb, &request.url)?;
        let (mime_type, warning) = match response.content_type {
            Some(actual) if mime_matches(&request.expected_mime, &actual) => (actual, None),
            Some(actual) => {
                let warning = format!("mechanism returned {actual}, binding declares {}", request.expected_mime);
                (actual, Some(warning))
            }
            None if request.expected_mime == "*/*" => ("application/octet-stream".to_owned(), None),
            None => (request.expected_mime.clone(), None),
        };
        Ok(Dissemination {
            mime_type,
            warning,
            body: response.body,
        })
    }

    /// The repository URL a mechanism uses to pull a bound datastream.
    pub fn datastream_url(&self, pid: &Pid, dsid: &str, as_of: Option<Timestamp>) -> String {
        match as_of {
            Some(t) => format!("{}/get/{pid}/{dsid}?asOfDate={t}", self.base_url),
            None => format!("{}/get/{pid}/{dsid}", self.base_url),
        }
    }

    /// Datastream bytes as of `as_of`; the target of binding-key URLs.
    pub fn get_datastream_direct(&self, pid: &Pid, dsid: &str, as_of: Option<Timestamp>) -> Result<ResolvedContent, Error> {
        let object = self.store.get_object(pid)?;
        check_as_of(&object, as_of)?;
        self.store.resolve_datastream(&object, dsid, as_of)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mime_matching() {
        assert!(mime_matches("*/*", "text/plain"));
        assert!(mime_matches("image/jpeg", "image/jpeg; q=1"));
        assert!(mime_matches("image/*", "image/png"));
        assert!(mime_matches("IMAGE/JPEG", "image/jpeg"));
        assert!(!mime_matches("image/jpeg", "text/html"));
        assert!(!mime_matches("image/*", "text/plain"));
    }
}
