use std::collections::{BTreeMap, HashMap, HashSet};

use base64::Engine;

use super::{
    StructuralViolation, ViolationCode as C, AUDIT_SEC, DATASTREAMS_GRP, METS_NS, SYSMETA_SEC,
};
use crate::error::Error;
use crate::model::{
    is_binding_key, split_version_suffix, AuditAction, AuditRecord, ComponentId, ContentKey,
    ContentLocation, Datastream, DatastreamVersion, DigitalObject, Disseminator,
    DisseminatorVersion, ObjectKind, Pid, Timestamp,
};
use crate::xml::{self, Element, XLINK_NS};

/// Inline content found in `FContent/binData`, keyed by its digest.
pub type InlineContent = Vec<(ContentKey, Vec<u8>)>;

/// Lists every profile violation in a raw document. `Err` only for
/// documents that are not well-formed XML.
pub fn validate_structure(doc: &[u8]) -> Result<Vec<StructuralViolation>, Error> {
    let root = xml::parse(doc)?;
    Ok(validate_element(&root))
}

pub fn validate_element(root: &Element) -> Vec<StructuralViolation> {
    Analyzer::default().run(root).1
}

pub fn decode_object(doc: &[u8]) -> Result<DigitalObject, Error> {
    decode_with_content(doc).map(|(obj, _)| obj)
}

pub fn decode_with_content(doc: &[u8]) -> Result<(DigitalObject, InlineContent), Error> {
    decode_element(&xml::parse(doc)?)
}

pub fn decode_element(root: &Element) -> Result<(DigitalObject, InlineContent), Error> {
    match Analyzer::default().run(root) {
        (Some(decoded), v) if v.is_empty() => Ok(decoded),
        (_, v) => Err(Error::Structural(v)),
    }
}

#[derive(Default)]
struct Analyzer {
    violations: Vec<StructuralViolation>,
}

struct FileGroup {
    id: ComponentId,
    versions: Vec<DatastreamVersion>,
}

struct StructMap {
    locator: String,
    bindings: BTreeMap<String, ComponentId>,
}

struct BehaviorSec {
    group: ComponentId,
    locator: String,
    version: DisseminatorVersion,
    struct_id: String,
}

fn at(parent: &str, el: &Element) -> String {
    match el.get("ID") {
        Some(id) => format!("{parent}/{}[@ID='{id}']", el.local),
        None => format!("{parent}/{}", el.local),
    }
}

impl Analyzer {
    fn flag(&mut self, code: C, locator: impl Into<String>, message: impl Into<String>) {
        self.violations.push(StructuralViolation {
            code,
            locator: locator.into(),
            message: message.into(),
        });
    }

    fn required<'e>(&mut self, el: &'e Element, loc: &str, attr: &str) -> Option<&'e str> {
        let v = el.get(attr);
        if v.is_none() {
            self.flag(C::MissingAttribute, format!("{loc}/@{attr}"), format!("{} requires {attr}", el.local));
        }
        v
    }

    fn timestamp(&mut self, el: &Element, loc: &str, attr: &str) -> Option<Timestamp> {
        let raw = self.required(el, loc, attr)?;
        match raw.parse() {
            Ok(ts) => Some(ts),
            Err(_) => {
                self.flag(C::BadTimestamp, format!("{loc}/@{attr}"), format!("{raw:?} is not YYYY-MM-DDThh:mm:ss"));
                None
            }
        }
    }

    fn pid_link(&mut self, parent: &Element, loc: &str, local: &str) -> Option<Pid> {
        let mut links = parent.children_named(METS_NS, local);
        let (Some(el), None) = (links.next(), links.next()) else {
            self.flag(C::MissingElement, format!("{loc}/{local}"), format!("exactly one {local} required"));
            return None;
        };
        let Some(raw) = el.get_ns(XLINK_NS, "simpleLink") else {
            self.flag(C::MissingAttribute, format!("{loc}/{local}/@xlink:simpleLink"), "link target required");
            return None;
        };
        match raw.parse() {
            Ok(pid) => Some(pid),
            Err(e) => {
                self.flag(C::BadPid, format!("{loc}/{local}/@xlink:simpleLink"), e.to_string());
                None
            }
        }
    }

    fn run(mut self, root: &Element) -> (Option<(DigitalObject, InlineContent)>, Vec<StructuralViolation>) {
        let decoded = self.analyze(root);
        let ok = self.violations.is_empty();
        (decoded.filter(|_| ok), self.violations)
    }

    fn analyze(&mut self, root: &Element) -> Option<(DigitalObject, InlineContent)> {
        if !root.is(METS_NS, "mets") {
            self.flag(
                C::BadRoot,
                format!("/{}", root.qname),
                format!("root must be mets in namespace {METS_NS}"),
            );
            return None;
        }
        let loc = "/mets";
        let pid = match root.get("OBJID") {
            None => {
                self.flag(C::MissingObjid, "/mets/@OBJID", "object PID missing");
                None
            }
            Some(raw) => match raw.parse::<Pid>() {
                Ok(pid) => Some(pid),
                Err(e) => {
                    self.flag(C::BadPid, "/mets/@OBJID", e.to_string());
                    None
                }
            },
        };
        let kind = match root.get("TYPE").map(str::parse::<ObjectKind>) {
            Some(Ok(kind)) => Some(kind),
            other => {
                let msg = match other {
                    None => "TYPE missing".to_owned(),
                    Some(_) => format!("{:?} is not an object kind", root.get("TYPE").unwrap_or_default()),
                };
                self.flag(C::UnknownKind, "/mets/@TYPE", msg);
                None
            }
        };
        let label = self.required(root, loc, "LABEL").map(str::to_owned);

        self.check_unique_ids(root);

        let mut header = None;
        let mut sysmeta = BTreeMap::new();
        let mut audit: Vec<AuditRecord> = Vec::new();
        let mut groups: Vec<FileGroup> = Vec::new();
        let mut inline: InlineContent = Vec::new();
        let mut structmaps: Vec<(String, StructMap)> = Vec::new();
        let mut behaviors: Vec<BehaviorSec> = Vec::new();
        let mut saw = HashSet::new();

        // Audit ids must be known before files and behaviorSecs reference them.
        let audit_ids: HashSet<&str> = root
            .children_named(METS_NS, "amdSec")
            .filter(|s| s.get("ID") == Some(AUDIT_SEC))
            .flat_map(|s| s.children.iter().filter_map(|c| c.get("ID")))
            .collect();

        for child in &root.children {
            let cloc = at(loc, child);
            let singleton = matches!(child.local.as_str(), "metsHdr" | "fileSec")
                || (child.local == "amdSec" && child.ns.as_deref() == Some(METS_NS));
            if child.ns.as_deref() != Some(METS_NS) {
                self.flag(C::UnexpectedElement, cloc, format!("{} is not part of the profile", child.qname));
                continue;
            }
            let key = format!("{}#{}", child.local, child.get("ID").unwrap_or(""));
            if singleton && !saw.insert(key) {
                self.flag(C::UnexpectedElement, cloc, format!("{} may appear only once", child.local));
                continue;
            }
            match child.local.as_str() {
                "metsHdr" => {
                    let created = self.timestamp(child, &cloc, "CREATEDATE");
                    let modified = self.timestamp(child, &cloc, "LASTMODDATE");
                    header = Some((created, modified, cloc));
                }
                "amdSec" => match child.get("ID") {
                    Some(SYSMETA_SEC) => self.sysmeta(child, &cloc, &mut sysmeta),
                    Some(AUDIT_SEC) => self.audit(child, &cloc, &mut audit),
                    _ => self.flag(
                        C::UnexpectedElement,
                        cloc,
                        format!("amdSec ID must be {SYSMETA_SEC} or {AUDIT_SEC}"),
                    ),
                },
                "fileSec" => self.file_sec(child, &cloc, &audit_ids, &mut groups, &mut inline),
                "structMap" => {
                    if let Some(id) = self.required(child, &cloc, "ID") {
                        let id = id.to_owned();
                        let map = self.struct_map(child, &cloc);
                        structmaps.push((id, map));
                    }
                }
                "behaviorSec" => {
                    if let Some(b) = self.behavior_sec(child, &cloc, &audit_ids) {
                        behaviors.push(b);
                    }
                }
                _ => self.flag(C::UnexpectedElement, cloc, format!("{} is not part of the profile", child.qname)),
            }
        }

        let (created, modified, hdr_loc) = match header {
            Some(h) => h,
            None => {
                self.flag(C::MissingElement, "/mets/metsHdr", "metsHdr required");
                (None, None, String::new())
            }
        };

        let ds_ids: HashSet<&str> = groups.iter().map(|g| g.id.as_str()).collect();

        // Binding maps: targets must be datastreams; each map used by one behaviorSec.
        for (_, map) in &structmaps {
            for (key, dsid) in &map.bindings {
                if !ds_ids.contains(dsid.as_str()) {
                    self.flag(
                        C::DanglingFileid,
                        format!("{}/div[@TYPE='{key}']/fptr/@FILEID", map.locator),
                        format!("{dsid} names no datastream"),
                    );
                }
            }
        }
        let mut map_users: HashMap<&str, usize> = HashMap::new();
        for b in &behaviors {
            if structmaps.iter().any(|(id, _)| id == &b.struct_id) {
                *map_users.entry(b.struct_id.as_str()).or_default() += 1;
            } else {
                self.flag(
                    C::DanglingStructid,
                    format!("{}/@STRUCTID", b.locator),
                    format!("no structMap with ID {}", b.struct_id),
                );
            }
            if ds_ids.contains(b.group.as_str()) {
                self.flag(
                    C::DuplicateId,
                    format!("{}/@GROUPID", b.locator),
                    format!("{} is already a datastream id", b.group),
                );
            }
        }
        for (id, map) in &structmaps {
            match map_users.get(id.as_str()) {
                None => self.flag(C::OrphanStructmap, map.locator.clone(), "no behaviorSec refers to this structMap"),
                Some(n) if *n > 1 => self.flag(
                    C::DanglingStructid,
                    map.locator.clone(),
                    format!("structMap shared by {n} behaviorSecs"),
                ),
                _ => {}
            }
        }

        // Disseminator versions grouped by GROUPID, newest first in document order.
        let mut disseminators: BTreeMap<ComponentId, Disseminator> = BTreeMap::new();
        for b in behaviors {
            let diss = disseminators.entry(b.group.clone()).or_insert_with(|| Disseminator {
                id: b.group.clone(),
                versions: Vec::new(),
            });
            if let Some(prev) = diss.versions.last() {
                if prev.created <= b.version.created {
                    self.flag(
                        C::BadSeqOrder,
                        format!("{}/@CREATED", b.locator),
                        format!("{} must be older than {}", b.version.version_id, prev.version_id),
                    );
                }
            }
            let mut version = b.version;
            if let Some((_, map)) = structmaps.iter().find(|(id, _)| id == &b.struct_id) {
                version.binding_map = map.bindings.clone();
            }
            diss.versions.push(version);
        }

        let mut datastreams = BTreeMap::new();
        for g in groups {
            datastreams.insert(
                g.id.clone(),
                Datastream {
                    id: g.id,
                    versions: g.versions,
                },
            );
        }

        if let Some(kind) = kind {
            if let Some(reserved) = kind.reserved_datastream() {
                if !datastreams.contains_key(reserved) {
                    self.flag(
                        C::MissingReservedDs,
                        "/mets/fileSec",
                        format!("{kind} objects must carry a {reserved} datastream"),
                    );
                }
            }
        }

        let (Some(pid), Some(kind), Some(label), Some(created), Some(modified)) =
            (pid, kind, label, created, modified)
        else {
            return None;
        };
        let object = DigitalObject {
            pid,
            kind,
            label,
            created,
            modified,
            system_metadata: sysmeta,
            datastreams,
            disseminators,
            audit_trail: audit,
        };
        if modified < object.latest_activity() {
            self.flag(
                C::BadTimestamp,
                format!("{hdr_loc}/@LASTMODDATE"),
                format!("LASTMODDATE precedes newest activity {}", object.latest_activity()),
            );
        }
        Some((object, inline))
    }

    fn check_unique_ids(&mut self, root: &Element) {
        fn walk<'a>(el: &'a Element, path: String, seen: &mut HashMap<&'a str, String>, dups: &mut Vec<(String, String)>) {
            let here = at(&path, el);
            if let Some(id) = el.get("ID") {
                if let Some(first) = seen.get(id) {
                    dups.push((here.clone(), format!("ID {id:?} already used at {first}")));
                } else {
                    seen.insert(id, here.clone());
                }
            }
            for c in &el.children {
                walk(c, here.clone(), seen, dups);
            }
        }
        let mut seen = HashMap::new();
        let mut dups = Vec::new();
        walk(root, String::new(), &mut seen, &mut dups);
        for (loc, msg) in dups {
            self.flag(C::DuplicateId, loc, msg);
        }
    }

    fn sysmeta(&mut self, sec: &Element, loc: &str, out: &mut BTreeMap<String, String>) {
        for el in &sec.children {
            let eloc = at(loc, el);
            if !el.is(METS_NS, "sysMeta") {
                self.flag(C::UnexpectedElement, eloc, "only sysMeta entries allowed here");
                continue;
            }
            let (Some(name), Some(value)) = (self.required(el, &eloc, "NAME"), self.required(el, &eloc, "VALUE")) else {
                continue;
            };
            if out.insert(name.to_owned(), value.to_owned()).is_some() {
                self.flag(C::DuplicateId, format!("{eloc}[@NAME='{name}']"), format!("metadata key {name:?} repeated"));
            }
        }
    }

    fn audit(&mut self, sec: &Element, loc: &str, out: &mut Vec<AuditRecord>) {
        for md in &sec.children {
            let mloc = at(loc, md);
            if !md.is(METS_NS, "digiprovMD") {
                self.flag(C::UnexpectedElement, mloc, "only digiprovMD entries allowed here");
                continue;
            }
            let Some(id) = self.required(md, &mloc, "ID") else { continue };
            let expected = format!("audit{}", out.len() + 1);
            if id != expected {
                self.flag(C::BadAuditId, format!("{mloc}/@ID"), format!("expected {expected}"));
            }
            let mut records = md.children_named(METS_NS, "auditRecord");
            let (Some(rec), None) = (records.next(), records.next()) else {
                self.flag(C::MissingElement, format!("{mloc}/auditRecord"), "exactly one auditRecord required");
                continue;
            };
            if md.children.len() != 1 {
                self.flag(C::UnexpectedElement, mloc.clone(), "digiprovMD holds only its auditRecord");
            }
            let rloc = format!("{mloc}/auditRecord");
            let action = self.required(rec, &rloc, "ACTION").and_then(|a| match a.parse::<AuditAction>() {
                Ok(a) => Some(a),
                Err(_) => {
                    self.flag(C::UnknownAction, format!("{rloc}/@ACTION"), format!("{a:?} is not an audit action"));
                    None
                }
            });
            let date = self.timestamp(rec, &rloc, "DATE");
            let responsible = self.required(rec, &rloc, "RESPONSIBLE");
            if let (Some(prev), Some(date)) = (out.last(), date) {
                if date < prev.date {
                    self.flag(C::BadSeqOrder, format!("{rloc}/@DATE"), format!("dated before {}", prev.id));
                }
            }
            // Keep numbering aligned even when this record is unusable.
            out.push(AuditRecord {
                id: id.to_owned(),
                action: action.unwrap_or(AuditAction::Ingest),
                component_id: rec.get("COMPONENT").unwrap_or_default().to_owned(),
                responsible: responsible.unwrap_or_default().to_owned(),
                date: date.unwrap_or(Timestamp::from_unix(i64::MIN / 2)),
                justification: rec.get("JUSTIFICATION").unwrap_or_default().to_owned(),
            });
        }
    }

    fn file_sec(
        &mut self,
        sec: &Element,
        loc: &str,
        audit_ids: &HashSet<&str>,
        out: &mut Vec<FileGroup>,
        inline: &mut InlineContent,
    ) {
        let mut outer = sec.children.iter();
        let top = match (outer.next(), outer.next()) {
            (Some(top), None) if top.is(METS_NS, "fileGrp") && top.get("ID") == Some(DATASTREAMS_GRP) => top,
            _ => {
                self.flag(
                    C::UnexpectedElement,
                    loc,
                    format!("fileSec must hold exactly one fileGrp with ID {DATASTREAMS_GRP}"),
                );
                return;
            }
        };
        let tloc = at(loc, top);
        for grp in &top.children {
            let gloc = at(&tloc, grp);
            if !grp.is(METS_NS, "fileGrp") {
                self.flag(C::UnexpectedElement, gloc, "datastreams are fileGrp elements");
                continue;
            }
            let Some(raw_id) = self.required(grp, &gloc, "ID") else { continue };
            let id = match ComponentId::new(raw_id) {
                Ok(id) => id,
                Err(_) => {
                    self.flag(C::BadComponentId, format!("{gloc}/@ID"), format!("{raw_id:?} is not a component id"));
                    continue;
                }
            };
            if grp.children.is_empty() {
                self.flag(C::EmptyComponent, gloc.clone(), "datastream has no versions");
            }
            let mut versions: Vec<DatastreamVersion> = Vec::new();
            for (i, file) in grp.children.iter().enumerate() {
                let floc = at(&gloc, file);
                if !file.is(METS_NS, "file") {
                    self.flag(C::UnexpectedElement, floc, "datastream versions are file elements");
                    continue;
                }
                if let Some(v) = self.file(file, &floc, &id, i, audit_ids, inline) {
                    if let Some(prev) = versions.last() {
                        if prev.created <= v.created {
                            self.flag(
                                C::BadSeqOrder,
                                format!("{floc}/@CREATED"),
                                format!("{} must be older than {}", v.version_id, prev.version_id),
                            );
                        }
                    }
                    versions.push(v);
                }
            }
            out.push(FileGroup { id, versions });
        }
    }

    fn file(
        &mut self,
        file: &Element,
        loc: &str,
        dsid: &ComponentId,
        index: usize,
        audit_ids: &HashSet<&str>,
        inline: &mut InlineContent,
    ) -> Option<DatastreamVersion> {
        let version_id = self.required(file, loc, "ID");
        if let Some(vid) = version_id {
            if split_version_suffix(vid).map(|(b, _)| b) != Some(dsid.as_str()) {
                self.flag(C::BadVersionId, format!("{loc}/@ID"), format!("expected {dsid}.<n>"));
            }
        }
        if let Some(seq) = self.required(file, loc, "SEQ") {
            if seq != (index + 1).to_string() {
                self.flag(C::BadSeqOrder, format!("{loc}/@SEQ"), format!("expected SEQ {}", index + 1));
            }
        }
        let created = self.timestamp(file, loc, "CREATED");
        let mime = self.required(file, loc, "MIMETYPE").filter(|m| !m.is_empty());
        let admid = self.required(file, loc, "ADMID");
        if let Some(a) = admid {
            if !audit_ids.contains(a) {
                self.flag(C::DanglingAdmid, format!("{loc}/@ADMID"), format!("no audit record {a}"));
            }
        }

        let mut location = None;
        let mut flocats = 0;
        let mut fcontent = None;
        for c in &file.children {
            if c.is(METS_NS, "FLocat") {
                flocats += 1;
                if c.get("LOCTYPE") != Some("URL") {
                    self.flag(C::BadLocation, format!("{loc}/FLocat/@LOCTYPE"), "LOCTYPE must be URL");
                }
                match c.get_ns(XLINK_NS, "href").map(ContentLocation::parse) {
                    Some(Ok(l)) => location = Some(l),
                    Some(Err(e)) => self.flag(C::BadLocation, format!("{loc}/FLocat/@xlink:href"), e.to_string()),
                    None => self.flag(C::MissingAttribute, format!("{loc}/FLocat/@xlink:href"), "href required"),
                }
            } else if c.is(METS_NS, "FContent") && fcontent.is_none() {
                fcontent = Some(c);
            } else {
                self.flag(C::UnexpectedElement, at(loc, c), format!("{} not allowed in file", c.local));
            }
        }
        if flocats != 1 {
            self.flag(C::MissingElement, format!("{loc}/FLocat"), "exactly one FLocat required");
        }
        if let Some(fc) = fcontent {
            let data = fc.first_child(METS_NS, "binData").map(|b| b.text.trim());
            let bytes = data.and_then(|d| {
                let cleaned: String = d.chars().filter(|c| !c.is_whitespace()).collect();
                base64::engine::general_purpose::STANDARD.decode(cleaned).ok()
            });
            match (bytes, &location) {
                (Some(bytes), Some(ContentLocation::Internal(key))) if &ContentKey::of(&bytes) == key => {
                    inline.push((key.clone(), bytes));
                }
                _ => self.flag(
                    C::InlineContentMismatch,
                    format!("{loc}/FContent"),
                    "inline content must be base64 binData whose digest matches a repo: location",
                ),
            }
        }

        Some(DatastreamVersion {
            version_id: version_id?.to_owned(),
            created: created?,
            mime_type: mime?.to_owned(),
            location: location?,
            audit_id: admid?.to_owned(),
        })
    }

    fn struct_map(&mut self, map: &Element, loc: &str) -> StructMap {
        let mut bindings = BTreeMap::new();
        for (i, div) in map.children.iter().enumerate() {
            let dloc = format!("{loc}/div[{}]", i + 1);
            if !div.is(METS_NS, "div") {
                self.flag(C::UnexpectedElement, dloc, "structMap holds div elements");
                continue;
            }
            let key = self.required(div, &dloc, "TYPE");
            if let Some(order) = self.required(div, &dloc, "ORDER") {
                if order != (i + 1).to_string() {
                    self.flag(C::BadSeqOrder, format!("{dloc}/@ORDER"), format!("expected ORDER {}", i + 1));
                }
            }
            let mut fptrs = div.children_named(METS_NS, "fptr");
            let target = match (fptrs.next(), fptrs.next()) {
                (Some(f), None) if div.children.len() == 1 => self.required(f, &format!("{dloc}/fptr"), "FILEID"),
                _ => {
                    self.flag(C::MissingElement, format!("{dloc}/fptr"), "each div holds exactly one fptr");
                    None
                }
            };
            let Some(key) = key else { continue };
            if !is_binding_key(key) {
                self.flag(C::BadBindingKey, format!("{dloc}/@TYPE"), format!("{key:?} is not an uppercase binding key"));
                continue;
            }
            let Some(target) = target else { continue };
            let Ok(target) = ComponentId::new(target) else {
                self.flag(C::DanglingFileid, format!("{dloc}/fptr/@FILEID"), format!("{target:?} names no datastream"));
                continue;
            };
            if bindings.insert(key.to_owned(), target).is_some() {
                self.flag(C::DuplicateBindingKey, format!("{dloc}/@TYPE"), format!("{key} bound twice"));
            }
        }
        StructMap {
            locator: loc.to_owned(),
            bindings,
        }
    }

    fn behavior_sec(&mut self, el: &Element, loc: &str, audit_ids: &HashSet<&str>) -> Option<BehaviorSec> {
        let id = self.required(el, loc, "ID");
        let group = self.required(el, loc, "GROUPID").and_then(|g| match ComponentId::new(g) {
            Ok(g) => Some(g),
            Err(_) => {
                self.flag(C::BadComponentId, format!("{loc}/@GROUPID"), format!("{g:?} is not a component id"));
                None
            }
        });
        if let (Some(id), Some(group)) = (id, &group) {
            if split_version_suffix(id).map(|(b, _)| b) != Some(group.as_str()) {
                self.flag(C::BadVersionId, format!("{loc}/@ID"), format!("expected {group}.<n>"));
            }
        }
        let created = self.timestamp(el, loc, "CREATED");
        let admid = self.required(el, loc, "ADMID");
        if let Some(a) = admid {
            if !audit_ids.contains(a) {
                self.flag(C::DanglingAdmid, format!("{loc}/@ADMID"), format!("no audit record {a}"));
            }
        }
        let struct_id = self.required(el, loc, "STRUCTID");
        let bdef = self.pid_link(el, loc, "interfaceDef");
        let bmech = self.pid_link(el, loc, "mechanism");
        for c in &el.children {
            if !(c.is(METS_NS, "interfaceDef") || c.is(METS_NS, "mechanism")) {
                self.flag(C::UnexpectedElement, at(loc, c), format!("{} not allowed in behaviorSec", c.local));
            }
        }
        if let (Some(b), Some(m)) = (&bdef, &bmech) {
            if b == m {
                self.flag(C::SameBdefBmech, loc, format!("{b} cannot be both definition and mechanism"));
            }
        }
        Some(BehaviorSec {
            group: group?,
            locator: loc.to_owned(),
            struct_id: struct_id?.to_owned(),
            version: DisseminatorVersion {
                version_id: id?.to_owned(),
                created: created?,
                bdef_pid: bdef?,
                bmech_pid: bmech?,
                binding_map: BTreeMap::new(),
                audit_id: admid?.to_owned(),
            },
        })
    }
}
