use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::{Pid, Timestamp, Versioned};
use crate::error::Error;

/// Datastream id reserved for the abstract method map of a behavior definition.
pub const METHODMAP_DSID: &str = "METHODMAP";
/// Datastream id reserved for the concrete bindings of a behavior mechanism.
pub const SERVICEBINDINGS_DSID: &str = "SERVICEBINDINGS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ObjectKind {
    Data,
    BehaviorDefinition,
    BehaviorMechanism,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 3] = [
        ObjectKind::Data,
        ObjectKind::BehaviorDefinition,
        ObjectKind::BehaviorMechanism,
    ];

    pub fn token(self) -> &'static str {
        match self {
            ObjectKind::Data => "DATA",
            ObjectKind::BehaviorDefinition => "BEHAVIOR_DEFINITION",
            ObjectKind::BehaviorMechanism => "BEHAVIOR_MECHANISM",
        }
    }

    /// The datastream a surrogate object must carry, if any.
    pub fn reserved_datastream(self) -> Option<&'static str> {
        match self {
            ObjectKind::Data => None,
            ObjectKind::BehaviorDefinition => Some(METHODMAP_DSID),
            ObjectKind::BehaviorMechanism => Some(SERVICEBINDINGS_DSID),
        }
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for ObjectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ObjectKind::ALL
            .into_iter()
            .find(|k| k.token() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown object kind {s:?}")))
    }
}

/// Id of a datastream or disseminator: `[A-Z][A-Z0-9._-]*`.
///
/// Ids ending in `.<digits>` are refused so they can never collide with a
/// version id of another component in the same METS document.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct ComponentId(String);

impl ComponentId {
    pub fn new(id: &str) -> Result<Self, Error> {
        let mut chars = id.chars();
        let shape_ok = matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
            && chars.all(|c| {
                c.is_ascii_uppercase() || c.is_ascii_digit() || matches!(c, '.' | '_' | '-')
            });
        if !shape_ok || split_version_suffix(id).is_some() {
            return Err(Error::InvalidComponentId(id.to_owned()));
        }
        Ok(Self(id.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ComponentId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl std::borrow::Borrow<str> for ComponentId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// Splits `"DS1.12"` into `("DS1", 12)`.
pub fn split_version_suffix(version_id: &str) -> Option<(&str, u64)> {
    let (base, n) = version_id.rsplit_once('.')?;
    if base.is_empty() || n.is_empty() || !n.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if n.len() > 1 && n.starts_with('0') {
        return None;
    }
    Some((base, n.parse().ok()?))
}

/// Binding keys and placeholder names: `[A-Z][A-Z0-9_]*`.
pub fn is_binding_key(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

/// Lowercase hex SHA-256 digest naming an internal content blob.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct ContentKey(String);

impl ContentKey {
    pub fn new(hex: &str) -> Result<Self, Error> {
        if hex.len() == 64 && hex.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            Ok(Self(hex.to_owned()))
        } else {
            Err(Error::InvalidArgument(format!("bad content key {hex:?}")))
        }
    }

    pub fn of(bytes: &[u8]) -> Self {
        use sha2::{Digest, Sha256};
        Self(hex::encode(Sha256::digest(bytes)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ContentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Control {
    Internal,
    ExternalRef,
}

impl FromStr for Control {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "INTERNAL" => Ok(Control::Internal),
            "EXTERNAL" | "EXTERNAL_REF" => Ok(Control::ExternalRef),
            _ => Err(Error::InvalidArgument(format!("unknown control group {s:?}"))),
        }
    }
}

const REPO_SCHEME: &str = "repo:";

/// Where a datastream version's bytes live.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ContentLocation {
    Internal(ContentKey),
    External(String),
}

impl ContentLocation {
    pub fn external(url: &str) -> Result<Self, Error> {
        if is_absolute_http_url(url) {
            Ok(Self::External(url.to_owned()))
        } else {
            Err(Error::InvalidArgument(format!(
                "external location must be an absolute http(s) URL, got {url:?}"
            )))
        }
    }

    /// Parses the `xlink:href` form used in METS documents.
    pub fn parse(href: &str) -> Result<Self, Error> {
        match href.strip_prefix(REPO_SCHEME) {
            Some(key) => Ok(Self::Internal(ContentKey::new(key)?)),
            None => Self::external(href),
        }
    }

    pub fn control(&self) -> Control {
        match self {
            ContentLocation::Internal(_) => Control::Internal,
            ContentLocation::External(_) => Control::ExternalRef,
        }
    }
}

impl fmt::Display for ContentLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContentLocation::Internal(key) => write!(f, "{REPO_SCHEME}{key}"),
            ContentLocation::External(url) => f.write_str(url),
        }
    }
}

pub fn is_absolute_http_url(url: &str) -> bool {
    let rest = url
        .strip_prefix("http://")
        .or_else(|| url.strip_prefix("https://"));
    match rest {
        Some(rest) => {
            let host = rest.split(['/', '?', '#']).next().unwrap_or("");
            !host.is_empty() && !url.chars().any(|c| c.is_whitespace() || c.is_control())
        }
        None => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatastreamVersion {
    pub version_id: String,
    pub created: Timestamp,
    pub mime_type: String,
    pub location: ContentLocation,
    pub audit_id: String,
}

impl DatastreamVersion {
    pub fn control(&self) -> Control {
        self.location.control()
    }
}

impl Versioned for DatastreamVersion {
    fn version_id(&self) -> &str {
        &self.version_id
    }
    fn created(&self) -> Timestamp {
        self.created
    }
}

/// Versions are held newest-first; `seq` in METS is the 1-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Datastream {
    pub id: ComponentId,
    pub versions: Vec<DatastreamVersion>,
}

impl Datastream {
    pub fn newest(&self) -> &DatastreamVersion {
        &self.versions[0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisseminatorVersion {
    pub version_id: String,
    pub created: Timestamp,
    pub bdef_pid: Pid,
    pub bmech_pid: Pid,
    /// Binding key -> datastream id.
    pub binding_map: BTreeMap<String, ComponentId>,
    pub audit_id: String,
}

impl Versioned for DisseminatorVersion {
    fn version_id(&self) -> &str {
        &self.version_id
    }
    fn created(&self) -> Timestamp {
        self.created
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Disseminator {
    pub id: ComponentId,
    pub versions: Vec<DisseminatorVersion>,
}

impl Disseminator {
    pub fn newest(&self) -> &DisseminatorVersion {
        &self.versions[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AuditAction {
    Ingest,
    AddDatastream,
    ModifyDatastream,
    AddDisseminator,
    ModifyDisseminator,
    /// Reserved; component deletion is not offered.
    PurgeComponent,
}

impl AuditAction {
    pub const ALL: [AuditAction; 6] = [
        AuditAction::Ingest,
        AuditAction::AddDatastream,
        AuditAction::ModifyDatastream,
        AuditAction::AddDisseminator,
        AuditAction::ModifyDisseminator,
        AuditAction::PurgeComponent,
    ];

    pub fn token(self) -> &'static str {
        match self {
            AuditAction::Ingest => "INGEST",
            AuditAction::AddDatastream => "ADD_DATASTREAM",
            AuditAction::ModifyDatastream => "MODIFY_DATASTREAM",
            AuditAction::AddDisseminator => "ADD_DISSEMINATOR",
            AuditAction::ModifyDisseminator => "MODIFY_DISSEMINATOR",
            AuditAction::PurgeComponent => "PURGE_COMPONENT",
        }
    }
}

impl FromStr for AuditAction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AuditAction::ALL
            .into_iter()
            .find(|a| a.token() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown audit action {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditRecord {
    pub id: String,
    pub action: AuditAction,
    pub component_id: String,
    pub responsible: String,
    pub date: Timestamp,
    pub justification: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitalObject {
    pub pid: Pid,
    pub kind: ObjectKind,
    pub label: String,
    pub created: Timestamp,
    pub modified: Timestamp,
    pub system_metadata: BTreeMap<String, String>,
    pub datastreams: BTreeMap<ComponentId, Datastream>,
    pub disseminators: BTreeMap<ComponentId, Disseminator>,
    pub audit_trail: Vec<AuditRecord>,
}

impl DigitalObject {
    pub fn new(pid: Pid, kind: ObjectKind, label: impl Into<String>, created: Timestamp) -> Self {
        Self {
            pid,
            kind,
            label: label.into(),
            created,
            modified: created,
            system_metadata: BTreeMap::new(),
            datastreams: BTreeMap::new(),
            disseminators: BTreeMap::new(),
            audit_trail: Vec::new(),
        }
    }

    pub fn datastream(&self, dsid: &str) -> Option<&Datastream> {
        self.datastreams.get(dsid)
    }

    pub fn disseminator(&self, id: &str) -> Option<&Disseminator> {
        self.disseminators.get(id)
    }

    pub fn audit_record(&self, id: &str) -> Option<&AuditRecord> {
        self.audit_trail.iter().find(|r| r.id == id)
    }

    pub fn has_component(&self, id: &str) -> bool {
        self.datastreams.contains_key(id) || self.disseminators.contains_key(id)
    }

    /// Newest timestamp carried anywhere in the object.
    pub fn latest_activity(&self) -> Timestamp {
        let ds = self.datastreams.values().map(|d| d.newest().created);
        let diss = self.disseminators.values().map(|d| d.newest().created);
        let audit = self.audit_trail.iter().map(|r| r.date);
        ds.chain(diss).chain(audit).fold(self.created, Timestamp::max)
    }

    /// Every PID this object's disseminators point at, across all versions.
    pub fn referenced_pids(&self) -> impl Iterator<Item = &Pid> {
        self.disseminators
            .values()
            .flat_map(|d| d.versions.iter())
            .flat_map(|v| [&v.bdef_pid, &v.bmech_pid])
    }

    /// Checks the value-level invariants of the object model. An empty result
    /// means the object is encodable and will round-trip through METS.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.modified < self.latest_activity() {
            out.push(format!(
                "modified {} precedes newest activity {}",
                self.modified,
                self.latest_activity()
            ));
        }
        for (n, rec) in self.audit_trail.iter().enumerate() {
            if rec.id != format!("audit{}", n + 1) {
                out.push(format!("audit record {} out of sequence", rec.id));
            }
            if n > 0 && rec.date < self.audit_trail[n - 1].date {
                out.push(format!("audit record {} dated before its predecessor", rec.id));
            }
        }
        for (id, ds) in &self.datastreams {
            if &ds.id != id {
                out.push(format!("datastream keyed {id} has id {}", ds.id));
            }
            if self.disseminators.contains_key(id) {
                out.push(format!("{id} is both a datastream and a disseminator"));
            }
            check_versions(id, &ds.versions, &mut out);
            for v in &ds.versions {
                if self.audit_record(&v.audit_id).is_none() {
                    out.push(format!("{} references missing {}", v.version_id, v.audit_id));
                }
                if v.mime_type.is_empty() {
                    out.push(format!("{} has an empty mime type", v.version_id));
                }
            }
        }
        for (id, diss) in &self.disseminators {
            if &diss.id != id {
                out.push(format!("disseminator keyed {id} has id {}", diss.id));
            }
            check_versions(id, &diss.versions, &mut out);
            for v in &diss.versions {
                if self.audit_record(&v.audit_id).is_none() {
                    out.push(format!("{} references missing {}", v.version_id, v.audit_id));
                }
                if v.bdef_pid == v.bmech_pid {
                    out.push(format!("{} uses {} as both bdef and bmech", v.version_id, v.bdef_pid));
                }
                for (key, target) in &v.binding_map {
                    if !is_binding_key(key) {
                        out.push(format!("{} has malformed binding key {key:?}", v.version_id));
                    }
                    if !self.datastreams.contains_key(target) {
                        out.push(format!("{} binds {key} to missing {target}", v.version_id));
                    }
                }
            }
        }
        if let Some(reserved) = self.kind.reserved_datastream() {
            if !self.datastreams.contains_key(reserved) {
                out.push(format!("{} object lacks {reserved}", self.kind));
            }
        }
        self.check_text(&mut out);
        out
    }

    /// Free text must be representable in an XML 1.0 document.
    fn check_text(&self, out: &mut Vec<String>) {
        let mut texts: Vec<(&str, &str)> = vec![("label", &self.label)];
        for (k, v) in &self.system_metadata {
            texts.push(("system metadata name", k));
            texts.push(("system metadata value", v));
        }
        for rec in &self.audit_trail {
            texts.push(("responsible", &rec.responsible));
            texts.push(("justification", &rec.justification));
        }
        for v in self.datastreams.values().flat_map(|d| &d.versions) {
            texts.push(("mime type", &v.mime_type));
        }
        for (what, text) in texts {
            if let Some(c) = text.chars().find(|c| !crate::xml::is_xml_char(*c)) {
                out.push(format!("{what} contains {c:?}, which XML cannot carry"));
            }
        }
    }
}

fn check_versions<V: Versioned>(id: &ComponentId, versions: &[V], out: &mut Vec<String>) {
    if versions.is_empty() {
        out.push(format!("{id} has no versions"));
    }
    for w in versions.windows(2) {
        if w[0].created() <= w[1].created() {
            out.push(format!(
                "{id}: {} is not strictly newer than {}",
                w[0].version_id(),
                w[1].version_id()
            ));
        }
    }
    let mut seen = std::collections::HashSet::new();
    for v in versions {
        match split_version_suffix(v.version_id()) {
            Some((base, _)) if base == id.as_str() => {}
            _ => out.push(format!("{id}: malformed version id {}", v.version_id())),
        }
        if !seen.insert(v.version_id()) {
            out.push(format!("{id}: duplicate version id {}", v.version_id()));
        }
    }
}
