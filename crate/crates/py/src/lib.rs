//! Python module `dorepo`: open a repository, ingest and export METS
//! documents, mutate components, and run reflection and disseminations.

use std::collections::BTreeMap;
use std::sync::Arc;

use dorepo_core::demo::{self, StubEndpoints};
use dorepo_core::management::DisseminatorSpec;
use dorepo_core::metsio;
use dorepo_core::model::SystemClock;
use dorepo_core::{DatastreamChange, Error, NewContent, ObjectKind, Pid, Repository, RepositoryConfig, Timestamp};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

create_exception!(dorepo, RepositoryError, PyException, "A repository operation failed; `code` holds the error class.");

fn to_py(e: Error) -> PyErr {
    Python::attach(|py| {
        let err = RepositoryError::new_err(e.to_string());
        let value = err.value(py);
        let _ = value.setattr("code", e.code());
        let violations: Vec<(String, String, String)> = match &e {
            Error::Integrity(v) => v.iter().map(|v| (v.rule.as_str().to_owned(), v.subject.clone(), v.message.clone())).collect(),
            _ => Vec::new(),
        };
        let _ = value.setattr("violations", violations);
        err
    })
}

fn pid(s: &str) -> PyResult<Pid> {
    s.parse().map_err(to_py)
}

fn timestamp(s: Option<&str>) -> PyResult<Option<Timestamp>> {
    s.map(str::parse).transpose().map_err(to_py)
}

fn kind(s: &str) -> PyResult<ObjectKind> {
    match s.to_ascii_lowercase().as_str() {
        "data" => Ok(ObjectKind::Data),
        "bdef" => Ok(ObjectKind::BehaviorDefinition),
        "bmech" => Ok(ObjectKind::BehaviorMechanism),
        _ => s.parse().map_err(to_py),
    }
}

fn content(data: Option<Vec<u8>>, url: Option<String>) -> PyResult<Option<NewContent>> {
    match (data, url) {
        (Some(_), Some(_)) => Err(RepositoryError::new_err("give either data or url, not both")),
        (Some(d), None) => Ok(Some(NewContent::Internal(d))),
        (None, Some(u)) => Ok(Some(NewContent::External(u))),
        (None, None) => Ok(None),
    }
}

/// A repository rooted at a directory.
#[pyclass(name = "Repository", module = "dorepo", frozen)]
struct PyRepository {
    inner: Arc<Repository>,
}

#[pymethods]
impl PyRepository {
    /// `base_url` is where mechanism services reach `/get/{pid}/{dsid}`.
    #[new]
    #[pyo3(signature = (root, base_url = "http://127.0.0.1:8080", namespace = "demo"))]
    fn new(root: &str, base_url: &str, namespace: &str) -> PyResult<Self> {
        let mut config = RepositoryConfig::new(root, base_url);
        config.default_namespace = namespace.to_owned();
        let inner = Repository::open(&config).map_err(to_py)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    /// A repository whose mechanism calls are answered in-process by the
    /// demo stub transforms, for use without any network service.
    #[staticmethod]
    fn loopback(root: &str) -> PyResult<Self> {
        let (inner, _) = demo::loopback_repository(root.as_ref(), Arc::new(SystemClock)).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn base_url(&self) -> &str {
        self.inner.base_url()
    }

    fn __len__(&self) -> usize {
        self.inner.store().object_count()
    }

    fn __contains__(&self, p: &str) -> bool {
        p.parse::<Pid>().is_ok_and(|p| self.inner.store().contains(&p))
    }

    /// Ingests a METS document and returns the PID it was stored under.
    #[pyo3(signature = (document, principal = "python", justification = ""))]
    fn ingest(&self, py: Python<'_>, document: &[u8], principal: &str, justification: &str) -> PyResult<String> {
        let doc = document.to_vec();
        py.detach(|| self.inner.ingest(&doc, principal, justification))
            .map(|p| p.to_string())
            .map_err(to_py)
    }

    /// METS document of the object; `inline` embeds internal content.
    #[pyo3(signature = (pid, inline = false))]
    fn export<'py>(&self, py: Python<'py>, pid: &str, inline: bool) -> PyResult<Bound<'py, PyBytes>> {
        let p = self::pid(pid)?;
        let bytes = if inline { self.inner.export_with_content(&p) } else { self.inner.export(&p) }.map_err(to_py)?;
        Ok(PyBytes::new(py, &bytes))
    }

    #[pyo3(signature = (pid, principal = "python", justification = ""))]
    fn purge(&self, pid: &str, principal: &str, justification: &str) -> PyResult<()> {
        self.inner.purge_object(&self::pid(pid)?, principal, justification).map_err(to_py)
    }

    /// Objects sorted by PID, as dicts with pid, kind, label and modified.
    #[pyo3(signature = (kind = None, label = None))]
    fn list_objects<'py>(&self, py: Python<'py>, kind: Option<&str>, label: Option<&str>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let kind = kind.map(self::kind).transpose()?;
        self.inner
            .store()
            .list_objects(kind, label)
            .into_iter()
            .map(|e| {
                let d = PyDict::new(py);
                d.set_item("pid", e.pid.to_string())?;
                d.set_item("kind", e.kind.to_string())?;
                d.set_item("label", e.label)?;
                d.set_item("modified", e.modified.to_string())?;
                Ok(d)
            })
            .collect()
    }

    fn audit_trail<'py>(&self, py: Python<'py>, pid: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .audit_trail(&self::pid(pid)?)
            .map_err(to_py)?
            .into_iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("id", r.id)?;
                d.set_item("action", r.action.token())?;
                d.set_item("component", r.component_id)?;
                d.set_item("responsible", r.responsible)?;
                d.set_item("date", r.date.to_string())?;
                d.set_item("justification", r.justification)?;
                Ok(d)
            })
            .collect()
    }

    /// Adds a datastream holding `data`, or referring to `url`; returns the version id.
    #[pyo3(signature = (pid, dsid, mime_type, data = None, url = None, principal = "python", justification = ""))]
    #[allow(clippy::too_many_arguments)]
    fn add_datastream(
        &self,
        pid: &str,
        dsid: &str,
        mime_type: &str,
        data: Option<Vec<u8>>,
        url: Option<String>,
        principal: &str,
        justification: &str,
    ) -> PyResult<String> {
        let content = content(data, url)?.ok_or_else(|| RepositoryError::new_err("data or url is required"))?;
        self.inner
            .add_datastream(&self::pid(pid)?, dsid, mime_type, content, principal, justification)
            .map_err(to_py)
    }

    /// Appends a datastream version; unset arguments carry over.
    #[pyo3(signature = (pid, dsid, mime_type = None, data = None, url = None, principal = "python", justification = ""))]
    #[allow(clippy::too_many_arguments)]
    fn modify_datastream(
        &self,
        pid: &str,
        dsid: &str,
        mime_type: Option<String>,
        data: Option<Vec<u8>>,
        url: Option<String>,
        principal: &str,
        justification: &str,
    ) -> PyResult<String> {
        let change = DatastreamChange {
            mime_type,
            content: content(data, url)?,
        };
        self.inner
            .modify_datastream(&self::pid(pid)?, dsid, change, principal, justification)
            .map_err(to_py)
    }

    /// Adds or (with `modify=True`) re-versions a disseminator; `bindings`
    /// maps binding keys to datastream ids.
    #[pyo3(signature = (pid, dissid, bdef, bmech, bindings, modify = false, principal = "python", justification = ""))]
    #[allow(clippy::too_many_arguments)]
    fn set_disseminator(
        &self,
        pid: &str,
        dissid: &str,
        bdef: &str,
        bmech: &str,
        bindings: BTreeMap<String, String>,
        modify: bool,
        principal: &str,
        justification: &str,
    ) -> PyResult<String> {
        let spec = DisseminatorSpec {
            bdef_pid: self::pid(bdef)?,
            bmech_pid: self::pid(bmech)?,
            binding_map: bindings,
        };
        let p = self::pid(pid)?;
        if modify {
            self.inner.modify_disseminator(&p, dissid, &spec, principal, justification)
        } else {
            self.inner.add_disseminator(&p, dissid, &spec, principal, justification)
        }
        .map_err(to_py)
    }

    #[pyo3(signature = (pid, as_of = None))]
    fn get_behavior_def_types(&self, pid: &str, as_of: Option<&str>) -> PyResult<Vec<String>> {
        let bdefs = self.inner.get_behavior_def_types(&self::pid(pid)?, timestamp(as_of)?).map_err(to_py)?;
        Ok(bdefs.iter().map(ToString::to_string).collect())
    }

    /// Methods as dicts with name and parameters (name, required, default).
    #[pyo3(signature = (pid, bdef, as_of = None))]
    fn get_methods<'py>(&self, py: Python<'py>, pid: &str, bdef: &str, as_of: Option<&str>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let profile = self
            .inner
            .get_methods(&self::pid(pid)?, &self::pid(bdef)?, timestamp(as_of)?)
            .map_err(to_py)?;
        profile
            .methods
            .into_iter()
            .map(|m| {
                let params = m
                    .user_params
                    .into_iter()
                    .map(|p| {
                        let d = PyDict::new(py);
                        d.set_item("name", p.name)?;
                        d.set_item("required", p.required)?;
                        d.set_item("default", p.default)?;
                        Ok(d)
                    })
                    .collect::<PyResult<Vec<_>>>()?;
                let d = PyDict::new(py);
                d.set_item("name", m.name)?;
                d.set_item("parameters", params)?;
                Ok(d)
            })
            .collect()
    }

    /// Runs a behavior method; returns `(mime_type, body)`.
    #[pyo3(signature = (pid, bdef, method, args = None, as_of = None))]
    fn get_dissemination<'py>(
        &self,
        py: Python<'py>,
        pid: &str,
        bdef: &str,
        method: &str,
        args: Option<BTreeMap<String, String>>,
        as_of: Option<&str>,
    ) -> PyResult<(String, Bound<'py, PyBytes>)> {
        let (p, b, t) = (self::pid(pid)?, self::pid(bdef)?, timestamp(as_of)?);
        let args = args.unwrap_or_default();
        let (mime, body) = py
            .detach(|| {
                let d = self.inner.get_dissemination(&p, &b, method, &args, t)?;
                let mime = d.mime_type.clone();
                Ok::<_, Error>((mime, d.into_bytes()?))
            })
            .map_err(to_py)?;
        Ok((mime, PyBytes::new(py, &body)))
    }

    /// Datastream bytes as of `as_of` (newest when omitted).
    #[pyo3(signature = (pid, dsid, as_of = None))]
    fn get_datastream<'py>(&self, py: Python<'py>, pid: &str, dsid: &str, as_of: Option<&str>) -> PyResult<Bound<'py, PyBytes>> {
        let (p, t) = (self::pid(pid)?, timestamp(as_of)?);
        let bytes = py
            .detach(|| self.inner.get_datastream_direct(&p, dsid, t)?.into_bytes())
            .map_err(to_py)?;
        Ok(PyBytes::new(py, &bytes))
    }

    /// Violations across the whole repository as `(rule, subject, message)`.
    fn integrity_sweep(&self, py: Python<'_>) -> PyResult<Vec<(String, String, String)>> {
        let violations = py.detach(|| self.inner.integrity_sweep()).map_err(to_py)?;
        Ok(violations
            .into_iter()
            .map(|v| (v.rule.as_str().to_owned(), v.subject, v.message))
            .collect())
    }

    /// Installs the demo bdefs and bmechs, calling stubs on `host`/`ports`.
    #[pyo3(signature = (host = "127.0.0.1", ports = StubEndpoints::DEFAULT_PORTS))]
    fn install_demo_surrogates(&self, host: &str, ports: [u16; 4]) -> PyResult<()> {
        demo::install_surrogates(&self.inner, &StubEndpoints::on_host(host, ports)).map_err(to_py)
    }
}

/// Structural problems of a METS document as `(code, message)`; empty when valid.
#[pyfunction]
fn validate_structure(document: &[u8]) -> PyResult<Vec<(String, String)>> {
    let problems = metsio::validate_structure(document).map_err(to_py)?;
    Ok(problems.into_iter().map(|v| (v.code.as_str().to_owned(), v.message)).collect())
}

/// Decodes and re-encodes a document in canonical form, keeping inline content inline.
#[pyfunction]
fn canonicalize<'py>(py: Python<'py>, document: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
    let (object, inline) = metsio::decode_with_content(document).map_err(to_py)?;
    let inline: BTreeMap<_, _> = inline.into_iter().collect();
    let bytes = if inline.is_empty() {
        metsio::encode_object(&object)
    } else {
        metsio::encode_object_with_content(&object, |key| {
            inline.get(key).cloned().ok_or_else(|| Error::ContentNotFound(key.to_string()))
        })
        .map_err(to_py)?
    };
    Ok(PyBytes::new(py, &bytes))
}

/// The demo fixture documents as `(file name, document)`.
#[pyfunction]
#[pyo3(signature = (host = "127.0.0.1", ports = StubEndpoints::DEFAULT_PORTS))]
fn fixture_documents<'py>(py: Python<'py>, host: &str, ports: [u16; 4]) -> Vec<(String, Bound<'py, PyBytes>)> {
    demo::fixture_documents(&StubEndpoints::on_host(host, ports))
        .into_iter()
        .map(|(name, doc)| (name, PyBytes::new(py, &doc)))
        .collect()
}

#[pymodule]
fn dorepo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRepository>()?;
    m.add("RepositoryError", m.py().get_type::<RepositoryError>())?;
    m.add_function(wrap_pyfunction!(validate_structure, m)?)?;
    m.add_function(wrap_pyfunction!(canonicalize, m)?)?;
    m.add_function(wrap_pyfunction!(fixture_documents, m)?)?;
    Ok(())
}
