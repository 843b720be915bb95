//! Demo behaviors and content models: the bootstrap surrogates shipped in
//! `fixtures/`, and builders for data objects following two content models.
//!
//! | PID       | kind | role                                                   |
//! |-----------|------|--------------------------------------------------------|
//! | `bdef:1`  | bdef | image behaviors: GetThumbnail, GetHighResolution       |
//! | `bdef:2`  | bdef | watermark behaviors: GetThumbnail, GetWatermarked      |
//! | `bmech:1` | bmech| `bdef:1` for model A (four resolutions) via the echo stub |
//! | `bmech:2` | bmech| `bdef:1` for model B (one wavelet file) via the resizer |
//! | `bmech:3` | bmech| `bdef:2` via the watermarker and resizer stubs          |

use std::collections::BTreeMap;

use crate::error::Error;
use crate::management::NEW_PID_PLACEHOLDER;
use crate::metsio::encode_element_with_content;
use crate::model::{
    AuditAction, AuditRecord, ComponentId, ContentKey, ContentLocation, Datastream, DatastreamVersion, DigitalObject,
    Disseminator, DisseminatorVersion, ObjectKind, Pid, Timestamp, METHODMAP_DSID, SERVICEBINDINGS_DSID,
};
use crate::servicedesc::{encode_bindings, encode_method_map, Binding, MethodDef, MethodMap, ServiceBindings, UserParam, Verb};
use crate::xml::Element;

pub const IMAGE_BDEF: &str = "bdef:1";
pub const WATERMARK_BDEF: &str = "bdef:2";
pub const MODEL_A_BMECH: &str = "bmech:1";
pub const MODEL_B_BMECH: &str = "bmech:2";
pub const WATERMARK_BMECH: &str = "bmech:3";

pub const SURROGATE_CREATED: &str = "2001-01-01T00:00:00";
pub const DEMO_CREATED: &str = "2002-01-01T00:00:00";
pub const DESCRIPTOR_MIME: &str = "text/xml";
pub const IMAGE_MIME: &str = "image/jpeg";

/// Model A datastreams, smallest first.
pub const MODEL_A_DATASTREAMS: [&str; 4] = ["THUMB", "MEDIUM", "LARGE", "HIGHRES"];
pub const MODEL_B_DATASTREAM: &str = "WAVELET";
pub const THUMBNAIL_BYTES: usize = 64;

/// Base URLs of the stub services the demo mechanisms call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StubEndpoints {
    pub watermarker: String,
    pub resizer: String,
    pub echo: String,
    /// Static content server for external datastreams.
    pub content: String,
}

impl StubEndpoints {
    pub const DEFAULT_PORTS: [u16; 4] = [8101, 8102, 8103, 8104];

    pub fn on_host(host: &str, ports: [u16; 4]) -> Self {
        let url = |p: u16| format!("http://{host}:{p}");
        Self {
            watermarker: url(ports[0]),
            resizer: url(ports[1]),
            echo: url(ports[2]),
            content: url(ports[3]),
        }
    }
}

impl Default for StubEndpoints {
    fn default() -> Self {
        Self::on_host("127.0.0.1", Self::DEFAULT_PORTS)
    }
}

fn ts(s: &str) -> Timestamp {
    s.parse().expect("demo timestamps are well-formed")
}

fn pid(s: &str) -> Pid {
    s.parse().expect("demo PIDs are well-formed")
}

/// Deterministic stand-in bytes for a named piece of content.
pub fn content_bytes(name: &str, len: usize) -> Vec<u8> {
    let seed = format!("<{name}>");
    seed.bytes().cycle().take(len).collect()
}

/// Body the static content server returns for `/content/<name>`.
pub fn served_content(name: &str) -> Vec<u8> {
    content_bytes(name, 1024)
}

fn method(name: &str, params: &[(&str, bool)], keys: &[&str]) -> MethodDef {
    MethodDef {
        name: name.to_owned(),
        user_params: params
            .iter()
            .map(|(n, required)| UserParam {
                name: (*n).to_owned(),
                required: *required,
                default: None,
            })
            .collect(),
        binding_keys: keys.iter().map(|k| (*k).to_owned()).collect(),
    }
}

fn method_map(methods: Vec<MethodDef>) -> MethodMap {
    MethodMap {
        methods: methods.into_iter().map(|m| (m.name.clone(), m)).collect(),
    }
}

pub fn image_methods() -> MethodMap {
    method_map(vec![method("GetThumbnail", &[], &[]), method("GetHighResolution", &[], &[])])
}

pub fn watermark_methods() -> MethodMap {
    method_map(vec![method("GetThumbnail", &[], &[]), method("GetWatermarked", &[("TEXT", true)], &[])])
}

fn binding(m: MethodDef, url_template: String) -> (String, Binding) {
    (
        m.name.clone(),
        Binding {
            method: m,
            verb: Verb::Get,
            url_template,
            expected_mime: IMAGE_MIME.to_owned(),
        },
    )
}

pub fn model_a_bindings(stubs: &StubEndpoints) -> ServiceBindings {
    ServiceBindings {
        implements_bdef: pid(IMAGE_BDEF),
        bindings: BTreeMap::from([
            binding(method("GetThumbnail", &[], &["THUMBNAIL"]), format!("{}/echo?src=(THUMBNAIL)", stubs.echo)),
            binding(
                method("GetHighResolution", &[], &["HIGHRES"]),
                format!("{}/echo?src=(HIGHRES)", stubs.echo),
            ),
        ]),
    }
}

pub fn model_b_bindings(stubs: &StubEndpoints) -> ServiceBindings {
    ServiceBindings {
        implements_bdef: pid(IMAGE_BDEF),
        bindings: BTreeMap::from([
            binding(
                method("GetThumbnail", &[], &["WAVELET"]),
                format!("{}/resize?src=(WAVELET)&size={THUMBNAIL_BYTES}", stubs.resizer),
            ),
            binding(
                method("GetHighResolution", &[], &["WAVELET"]),
                format!("{}/resize?src=(WAVELET)&size=full", stubs.resizer),
            ),
        ]),
    }
}

pub fn watermark_bindings(stubs: &StubEndpoints) -> ServiceBindings {
    ServiceBindings {
        implements_bdef: pid(WATERMARK_BDEF),
        bindings: BTreeMap::from([
            binding(
                method("GetThumbnail", &[], &["IMAGESRC"]),
                format!("{}/resize?src=(IMAGESRC)&size={THUMBNAIL_BYTES}", stubs.resizer),
            ),
            binding(
                method("GetWatermarked", &[("TEXT", true)], &["IMAGESRC"]),
                format!("{}/watermark?src=(IMAGESRC)&text=(TEXT)", stubs.watermarker),
            ),
        ]),
    }
}

/// Builds objects as an external author would: every component version has
/// its own audit record, dated when the version was created.
#[derive(Debug, Clone)]
pub struct ObjectBuilder {
    object: DigitalObject,
    content: BTreeMap<ContentKey, Vec<u8>>,
}

impl ObjectBuilder {
    pub fn new(pid: Pid, kind: ObjectKind, label: &str, created: Timestamp) -> Self {
        Self {
            object: DigitalObject::new(pid, kind, label, created),
            content: BTreeMap::new(),
        }
    }

    fn audit(&mut self, action: AuditAction, component: &str, date: Timestamp) -> String {
        let id = format!("audit{}", self.object.audit_trail.len() + 1);
        self.object.audit_trail.push(AuditRecord {
            id: id.clone(),
            action,
            component_id: component.to_owned(),
            responsible: "fixture".to_owned(),
            date,
            justification: String::new(),
        });
        id
    }

    pub fn system_metadata(mut self, name: &str, value: &str) -> Self {
        self.object.system_metadata.insert(name.to_owned(), value.to_owned());
        self
    }

    fn push_datastream_version(&mut self, dsid: &str, mime: &str, location: ContentLocation, created: Timestamp) {
        let id = ComponentId::new(dsid).expect("demo datastream ids are valid");
        let existing = self.object.datastreams.get(dsid).map_or(0, |d| d.versions.len());
        let action = if existing == 0 {
            AuditAction::AddDatastream
        } else {
            AuditAction::ModifyDatastream
        };
        let audit_id = self.audit(action, dsid, created);
        let version = DatastreamVersion {
            version_id: format!("{dsid}.{existing}"),
            created,
            mime_type: mime.to_owned(),
            location,
            audit_id,
        };
        self.object
            .datastreams
            .entry(id.clone())
            .or_insert_with(|| Datastream { id, versions: Vec::new() })
            .versions
            .insert(0, version);
    }

    /// Adds a version holding `bytes`; the bytes travel inline when encoded
    /// with [`ObjectBuilder::document`].
    pub fn internal(mut self, dsid: &str, mime: &str, bytes: Vec<u8>, created: Timestamp) -> Self {
        let key = ContentKey::of(&bytes);
        self.content.insert(key.clone(), bytes);
        self.push_datastream_version(dsid, mime, ContentLocation::Internal(key), created);
        self
    }

    /// Adds a version referring to content already in the repository.
    pub fn stored(mut self, dsid: &str, mime: &str, key: ContentKey, created: Timestamp) -> Self {
        self.push_datastream_version(dsid, mime, ContentLocation::Internal(key), created);
        self
    }

    pub fn external(mut self, dsid: &str, mime: &str, url: &str, created: Timestamp) -> Self {
        let location = ContentLocation::external(url).expect("demo URLs are absolute");
        self.push_datastream_version(dsid, mime, location, created);
        self
    }

    pub fn disseminator(mut self, id: &str, bdef: &str, bmech: &str, bindings: &[(&str, &str)], created: Timestamp) -> Self {
        let cid = ComponentId::new(id).expect("demo disseminator ids are valid");
        let existing = self.object.disseminators.get(id).map_or(0, |d| d.versions.len());
        let action = if existing == 0 {
            AuditAction::AddDisseminator
        } else {
            AuditAction::ModifyDisseminator
        };
        let audit_id = self.audit(action, id, created);
        let version = DisseminatorVersion {
            version_id: format!("{id}.{existing}"),
            created,
            bdef_pid: pid(bdef),
            bmech_pid: pid(bmech),
            binding_map: bindings
                .iter()
                .map(|(k, ds)| ((*k).to_owned(), ComponentId::new(ds).expect("demo datastream ids are valid")))
                .collect(),
            audit_id,
        };
        self.object
            .disseminators
            .entry(cid.clone())
            .or_insert_with(|| Disseminator { id: cid, versions: Vec::new() })
            .versions
            .insert(0, version);
        self
    }

    pub fn pid(&self) -> &Pid {
        &self.object.pid
    }

    pub fn build(mut self) -> DigitalObject {
        self.object.modified = self.object.latest_activity();
        self.object
    }

    /// METS document with inline content. With `mint`, OBJID is `new` so the
    /// repository assigns the PID at ingest.
    pub fn document(self, mint: bool) -> Vec<u8> {
        self.element(mint).to_document()
    }

    fn element(self, mint: bool) -> Element {
        let content = self.content.clone();
        let object = self.build();
        let mut root = encode_element_with_content(&object, |key| {
            content
                .get(key)
                .cloned()
                .ok_or_else(|| Error::ContentNotFound(key.to_string()))
        })
        .expect("builder holds the bytes of every internal version");
        if mint {
            for a in root.attrs.iter_mut().filter(|a| a.ns.is_none() && a.local == "OBJID") {
                a.value = NEW_PID_PLACEHOLDER.to_owned();
            }
        }
        root
    }
}

fn surrogate(pid_str: &str, kind: ObjectKind, label: &str, dsid: &str, descriptor: Vec<u8>) -> ObjectBuilder {
    let created = ts(SURROGATE_CREATED);
    ObjectBuilder::new(pid(pid_str), kind, label, created).internal(dsid, DESCRIPTOR_MIME, descriptor, created)
}

pub fn image_bdef() -> ObjectBuilder {
    surrogate(
        IMAGE_BDEF,
        ObjectKind::BehaviorDefinition,
        "Image behaviors",
        METHODMAP_DSID,
        encode_method_map(&image_methods(), "ImageBehaviors"),
    )
}

pub fn watermark_bdef() -> ObjectBuilder {
    surrogate(
        WATERMARK_BDEF,
        ObjectKind::BehaviorDefinition,
        "Watermark behaviors",
        METHODMAP_DSID,
        encode_method_map(&watermark_methods(), "WatermarkBehaviors"),
    )
}

pub fn model_a_bmech(stubs: &StubEndpoints) -> ObjectBuilder {
    surrogate(
        MODEL_A_BMECH,
        ObjectKind::BehaviorMechanism,
        "Image behaviors over four resolutions",
        SERVICEBINDINGS_DSID,
        encode_bindings(&model_a_bindings(stubs), "EchoImageService"),
    )
}

pub fn model_b_bmech(stubs: &StubEndpoints) -> ObjectBuilder {
    surrogate(
        MODEL_B_BMECH,
        ObjectKind::BehaviorMechanism,
        "Image behaviors over a wavelet file",
        SERVICEBINDINGS_DSID,
        encode_bindings(&model_b_bindings(stubs), "WaveletImageService"),
    )
}

pub fn watermark_bmech(stubs: &StubEndpoints) -> ObjectBuilder {
    surrogate(
        WATERMARK_BMECH,
        ObjectKind::BehaviorMechanism,
        "Watermarking image service",
        SERVICEBINDINGS_DSID,
        encode_bindings(&watermark_bindings(stubs), "WatermarkService"),
    )
}

/// Surrogates in dependency order: each bdef before the bmechs implementing it.
pub fn surrogates(stubs: &StubEndpoints) -> Vec<ObjectBuilder> {
    vec![
        image_bdef(),
        watermark_bdef(),
        model_a_bmech(stubs),
        model_b_bmech(stubs),
        watermark_bmech(stubs),
    ]
}

pub fn model_a_content(res: &str) -> Vec<u8> {
    let len = match res {
        "THUMB" => THUMBNAIL_BYTES,
        "MEDIUM" => 1024,
        "LARGE" => 2048,
        _ => 4096,
    };
    content_bytes(&format!("model-a/{res}"), len)
}

pub fn model_b_content() -> Vec<u8> {
    content_bytes("model-b/wavelet", 4096)
}

pub fn watermark_content() -> Vec<u8> {
    content_bytes("watermark/image", 512)
}

/// Content model A: four image resolutions, served through `bmech:1`.
pub fn model_a_object(pid_str: &str, label: &str) -> ObjectBuilder {
    let created = ts(DEMO_CREATED);
    let mut b = ObjectBuilder::new(pid(pid_str), ObjectKind::Data, label, created);
    for res in MODEL_A_DATASTREAMS {
        b = b.internal(res, IMAGE_MIME, model_a_content(res), created);
    }
    b.disseminator(
        "DISS1",
        IMAGE_BDEF,
        MODEL_A_BMECH,
        &[("THUMBNAIL", "THUMB"), ("HIGHRES", "HIGHRES")],
        created,
    )
}

/// Content model B: one wavelet-style file, served through `bmech:2`.
pub fn model_b_object(pid_str: &str, label: &str) -> ObjectBuilder {
    let created = ts(DEMO_CREATED);
    ObjectBuilder::new(pid(pid_str), ObjectKind::Data, label, created)
        .internal(MODEL_B_DATASTREAM, IMAGE_MIME, model_b_content(), created)
        .disseminator("DISS1", IMAGE_BDEF, MODEL_B_BMECH, &[("WAVELET", MODEL_B_DATASTREAM)], created)
}

/// An image wired to the watermarking service.
pub fn watermark_object(pid_str: &str, label: &str) -> ObjectBuilder {
    let created = ts(DEMO_CREATED);
    ObjectBuilder::new(pid(pid_str), ObjectKind::Data, label, created)
        .internal("IMAGE", IMAGE_MIME, watermark_content(), created)
        .disseminator("DISS1", WATERMARK_BDEF, WATERMARK_BMECH, &[("IMAGESRC", "IMAGE")], created)
}

pub const VERSIONED_DS1_OLD: &str = "2002-01-22T06:32:00";
pub const VERSIONED_DS1_NEW: &str = "2002-08-31T06:32:00";
pub const VERSIONED_OLD_NAME: &str = "img1a.jpg";
pub const VERSIONED_NEW_NAME: &str = "img1b.jpg";

/// An image whose DS1 was replaced: DS1.0 points at the older external
/// file, DS1.1 at its replacement. Both versions stay addressable by date.
pub fn versioned_object(pid_str: &str, stubs: &StubEndpoints) -> ObjectBuilder {
    let old = ts(VERSIONED_DS1_OLD);
    ObjectBuilder::new(pid(pid_str), ObjectKind::Data, "Versioned image", old)
        .external("DS1", IMAGE_MIME, &format!("{}/content/{VERSIONED_OLD_NAME}", stubs.content), old)
        .disseminator(
            "DISS1",
            IMAGE_BDEF,
            MODEL_A_BMECH,
            &[("THUMBNAIL", "DS1"), ("HIGHRES", "DS1")],
            old,
        )
        .external(
            "DS1",
            IMAGE_MIME,
            &format!("{}/content/{VERSIONED_NEW_NAME}", stubs.content),
            ts(VERSIONED_DS1_NEW),
        )
}

/// A disseminator naming a mechanism that does not exist.
pub fn broken_missing_bmech() -> ObjectBuilder {
    let created = ts(DEMO_CREATED);
    ObjectBuilder::new(pid("demo:90"), ObjectKind::Data, "Broken: missing mechanism", created)
        .internal("IMAGE", IMAGE_MIME, watermark_content(), created)
        .disseminator("DISS1", IMAGE_BDEF, "bmech:99", &[("THUMBNAIL", "IMAGE"), ("HIGHRES", "IMAGE")], created)
}

/// A disseminator subscribing to `bdef:1` through a mechanism for `bdef:2`.
pub fn broken_implements_mismatch() -> ObjectBuilder {
    let created = ts(DEMO_CREATED);
    ObjectBuilder::new(pid("demo:91"), ObjectKind::Data, "Broken: mechanism implements another bdef", created)
        .internal("IMAGE", IMAGE_MIME, watermark_content(), created)
        .disseminator("DISS1", IMAGE_BDEF, WATERMARK_BMECH, &[("IMAGESRC", "IMAGE")], created)
}

/// A disseminator that leaves the mechanism's IMAGESRC key unbound.
pub fn broken_unbound_key() -> ObjectBuilder {
    let created = ts(DEMO_CREATED);
    ObjectBuilder::new(pid("demo:92"), ObjectKind::Data, "Broken: unbound binding key", created)
        .internal("IMAGE", IMAGE_MIME, watermark_content(), created)
        .disseminator("DISS1", WATERMARK_BDEF, WATERMARK_BMECH, &[], created)
}

/// Every shipped fixture as `(file name, document)`, in ingest order.
pub fn fixture_documents(stubs: &StubEndpoints) -> Vec<(String, Vec<u8>)> {
    let named = |name: &str, b: ObjectBuilder, mint: bool| (format!("{name}.mets.xml"), b.document(mint));
    vec![
        named("bdef-image", image_bdef(), false),
        named("bdef-watermark", watermark_bdef(), false),
        named("bmech-image-four-resolutions", model_a_bmech(stubs), false),
        named("bmech-image-wavelet", model_b_bmech(stubs), false),
        named("bmech-watermark", watermark_bmech(stubs), false),
        named("image-four-resolutions", model_a_object("demo:1", "Four-resolution image"), false),
        named("image-wavelet", model_b_object("demo:2", "Wavelet image"), false),
        named("image-watermark", watermark_object("demo:3", "Image with watermarking"), false),
        named("image-versioned", versioned_object("demo:4", stubs), false),
        named("broken-bmech-missing", broken_missing_bmech(), true),
        named("broken-implements-mismatch", broken_implements_mismatch(), true),
        named("broken-unbound-key", broken_unbound_key(), true),
    ]
}

/// Ingests the five surrogates into a repository that lacks them.
pub fn install_surrogates(repo: &crate::Repository, stubs: &StubEndpoints) -> Result<(), Error> {
    for b in surrogates(stubs) {
        if !repo.store().contains(&b.object.pid) {
            repo.ingest(&b.document(false), "bootstrap", "demo surrogates")?;
        }
    }
    Ok(())
}

/// Output of the watermarker stub: `WM[<text>]` followed by the input.
pub fn watermark(text: &str, input: &[u8]) -> Vec<u8> {
    let mut out = format!("WM[{text}]").into_bytes();
    out.extend_from_slice(input);
    out
}

/// Output of the resizer stub: the first `size` bytes, or all of them for
/// `full`. `None` for a size that is neither.
pub fn resize(size: &str, input: &[u8]) -> Option<Vec<u8>> {
    match size {
        "full" => Some(input.to_vec()),
        n => n.parse::<usize>().ok().map(|n| input[..n.min(input.len())].to_vec()),
    }
}

/// Splits a query string into decoded `(name, value)` pairs. Values are
/// split at the first `=` only, so embedded URLs with their own query
/// survive intact.
pub fn query_pairs(query: &str) -> Vec<(String, String)> {
    let decode = |s: &str| {
        percent_encoding::percent_decode_str(&s.replace('+', " "))
            .decode_utf8_lossy()
            .into_owned()
    };
    query
        .split('&')
        .filter(|p| !p.is_empty())
        .map(|p| match p.split_once('=') {
            Some((k, v)) => (decode(k), decode(v)),
            None => (decode(p), String::new()),
        })
        .collect()
}

mod loopback {
    use std::io::Cursor;
    use std::sync::{Arc, OnceLock, Weak};

    use parking_lot::Mutex;

    use super::{query_pairs, resize, served_content, watermark, StubEndpoints, IMAGE_MIME};
    use crate::error::Error;
    use crate::model::{Pid, Timestamp};
    use crate::repository::Repository;
    use crate::servicedesc::Verb;
    use crate::store::{FetchResponse, Fetcher};

    /// In-process stand-in for the network: answers the stub services and the
    /// repository's own `/get` URLs without opening sockets.
    pub struct LoopbackFetcher {
        stubs: StubEndpoints,
        base_url: String,
        repo: OnceLock<Weak<Repository>>,
        log: Mutex<Vec<String>>,
    }

    fn status(code: u16) -> Error {
        Error::ExternalFetch {
            status: Some(code),
            timeout: false,
            detail: String::new(),
        }
    }

    fn ok(content_type: &str, body: Vec<u8>) -> Result<FetchResponse, Error> {
        Ok(FetchResponse {
            content_type: Some(content_type.to_owned()),
            body: Box::new(Cursor::new(body)),
        })
    }

    impl LoopbackFetcher {
        pub fn new(stubs: StubEndpoints, base_url: &str) -> Arc<Self> {
            Arc::new(Self {
                stubs,
                base_url: base_url.trim_end_matches('/').to_owned(),
                repo: OnceLock::new(),
                log: Mutex::new(Vec::new()),
            })
        }

        /// Connects the repository whose `/get` URLs this fetcher answers.
        pub fn attach(&self, repo: &Arc<Repository>) {
            let _ = self.repo.set(Arc::downgrade(repo));
        }

        /// Every URL fetched so far, in order.
        pub fn requests(&self) -> Vec<String> {
            self.log.lock().clone()
        }

        fn get_bytes(&self, url: &str) -> Result<(String, Vec<u8>), Error> {
            let resp = self.fetch(Verb::Get, url)?;
            let mut body = resp.body;
            let mut buf = Vec::new();
            std::io::Read::read_to_end(&mut body, &mut buf).map_err(|_| status(502))?;
            Ok((resp.content_type.unwrap_or_else(|| IMAGE_MIME.to_owned()), buf))
        }

        fn repository_get(&self, path: &str, query: &str) -> Result<FetchResponse, Error> {
            let repo = self.repo.get().and_then(Weak::upgrade).ok_or_else(|| status(503))?;
            let (pid, dsid) = path.split_once('/').ok_or_else(|| status(404))?;
            let pid: Pid = pid.parse().map_err(|_| status(400))?;
            let as_of = match query_pairs(query).into_iter().find(|(k, _)| k == "asOfDate") {
                Some((_, v)) => Some(v.parse::<Timestamp>().map_err(|_| status(400))?),
                None => None,
            };
            let resolved = repo
                .get_datastream_direct(&pid, dsid, as_of)
                .map_err(|e| status(if e.is_not_found() { 404 } else { 500 }))?;
            let mime = resolved.mime_type.clone();
            ok(&mime, resolved.into_bytes().map_err(|_| status(502))?)
        }
    }

    impl Fetcher for LoopbackFetcher {
        fn fetch(&self, _verb: Verb, url: &str) -> Result<FetchResponse, Error> {
            self.log.lock().push(url.to_owned());
            let (target, query) = url.split_once('?').unwrap_or((url, ""));
            let args = query_pairs(query);
            let arg = |name: &str| args.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str());

            if let Some(path) = target.strip_prefix(&format!("{}/get/", self.base_url)) {
                return self.repository_get(path, query);
            }
            if let Some(name) = target.strip_prefix(&format!("{}/content/", self.stubs.content)) {
                return ok(IMAGE_MIME, served_content(name));
            }
            if target == format!("{}/echo", self.stubs.echo) {
                let (mime, bytes) = self.get_bytes(arg("src").ok_or_else(|| status(400))?)?;
                return ok(&mime, bytes);
            }
            if target == format!("{}/resize", self.stubs.resizer) {
                let (mime, bytes) = self.get_bytes(arg("src").ok_or_else(|| status(400))?)?;
                let out = resize(arg("size").unwrap_or("full"), &bytes).ok_or_else(|| status(400))?;
                return ok(&mime, out);
            }
            if target == format!("{}/watermark", self.stubs.watermarker) {
                let (mime, bytes) = self.get_bytes(arg("src").ok_or_else(|| status(400))?)?;
                return ok(&mime, watermark(arg("text").unwrap_or(""), &bytes));
            }
            Err(status(404))
        }
    }
}

pub use loopback::LoopbackFetcher;

/// Base URL used by repositories wired to a [`LoopbackFetcher`].
pub const LOOPBACK_BASE_URL: &str = "http://repository.invalid";

/// A repository at `root` whose outbound requests are answered in-process
/// by the demo stub transforms.
pub fn loopback_repository(
    root: &std::path::Path,
    clock: std::sync::Arc<dyn crate::model::Clock>,
) -> Result<(std::sync::Arc<crate::Repository>, std::sync::Arc<LoopbackFetcher>), Error> {
    let fetcher = LoopbackFetcher::new(StubEndpoints::default(), LOOPBACK_BASE_URL);
    let config = crate::RepositoryConfig::new(root, LOOPBACK_BASE_URL);
    let repo = std::sync::Arc::new(crate::Repository::open_with(&config, fetcher.clone(), clock)?);
    fetcher.attach(&repo);
    Ok((repo, fetcher))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transforms() {
        assert_eq!(watermark("draft", b"abc"), b"WM[draft]abc");
        assert_eq!(resize("2", b"abc").unwrap(), b"ab");
        assert_eq!(resize("10", b"abc").unwrap(), b"abc");
        assert_eq!(resize("full", b"abc").unwrap(), b"abc");
        assert!(resize("big", b"abc").is_none());
    }

    #[test]
    fn query_keeps_embedded_urls() {
        let pairs = query_pairs("src=http://h/get/demo:1/DS1?asOfDate=2002-05-01T00:00:00&text=a%20b+c");
        assert_eq!(
            pairs,
            vec![
                ("src".into(), "http://h/get/demo:1/DS1?asOfDate=2002-05-01T00:00:00".into()),
                ("text".into(), "a b c".into()),
            ]
        );
    }

    #[test]
    fn fixtures_are_structurally_valid() {
        for (name, doc) in fixture_documents(&StubEndpoints::default()) {
            let violations = crate::metsio::validate_structure(&doc).unwrap();
            // Minted fixtures carry OBJID="new", which only ingest accepts.
            let violations: Vec<_> = violations
                .into_iter()
                .filter(|v| v.code != crate::metsio::ViolationCode::BadPid)
                .collect();
            assert!(violations.is_empty(), "{name}: {violations:?}");
        }
    }
}
