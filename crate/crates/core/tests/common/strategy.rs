//! Proptest generator for structurally valid digital objects of every kind.

use std::collections::{BTreeMap, BTreeSet};

use dorepo_core::model::{
    AuditAction, AuditRecord, ComponentId, ContentKey, ContentLocation, Datastream, DatastreamVersion,
    DigitalObject, Disseminator, DisseminatorVersion, ObjectKind, Pid, Timestamp,
};
use dorepo_core::xml::is_xml_char;
use proptest::prelude::*;

/// Most events any generated object carries: 8 datastreams and 4
/// disseminators with 5 versions each, plus an optional leading ingest.
const MAX_EVENTS: usize = 8 * 5 + 4 * 5 + 1;

pub fn text() -> impl Strategy<Value = String> {
    let ch = prop_oneof![
        8 => prop::char::range('a', 'z'),
        3 => prop::sample::select(vec![' ', '&', '<', '>', '"', '\'', '\t', '\n', '\r', ']', 'é', '漢', '😀']),
        1 => any::<char>().prop_filter("XML character", |c| is_xml_char(*c)),
    ];
    prop::collection::vec(ch, 0..16).prop_map(|v| v.into_iter().collect())
}

fn component_id() -> impl Strategy<Value = String> {
    "[A-Z][A-Z0-9._-]{0,6}".prop_filter("valid component id", |s| {
        ComponentId::new(s).is_ok() && s != "METHODMAP" && s != "SERVICEBINDINGS"
    })
}

fn location() -> impl Strategy<Value = ContentLocation> {
    prop_oneof![
        prop::collection::vec(any::<u8>(), 0..32).prop_map(|b| ContentLocation::Internal(ContentKey::of(&b))),
        ("[a-z]{1,8}", "[a-z0-9/]{0,10}").prop_map(|(host, path)| {
            ContentLocation::External(format!("http://{host}.example.org/{path}?a=1&b=%20x"))
        }),
    ]
}

fn mime() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["image/jpeg", "text/xml", "text/plain; charset=utf-8", "application/octet-stream"])
        .prop_map(str::to_owned)
}

type DsVersionPlan = (String, ContentLocation);
/// bdef, bmech, and binding keys paired with a datastream index.
type DissVersionPlan = (Pid, Pid, BTreeMap<String, usize>);

fn surrogate_pid() -> impl Strategy<Value = Pid> {
    (prop::sample::select(vec!["bdef", "bmech", "demo"]), 1u64..50)
        .prop_map(|(ns, serial)| Pid::new(ns, serial).unwrap())
}

fn diss_version() -> impl Strategy<Value = DissVersionPlan> {
    (
        surrogate_pid(),
        surrogate_pid(),
        prop::collection::btree_map("[A-Z][A-Z0-9_]{0,6}", 0usize..8, 0..4),
    )
}

struct Clock {
    now: Timestamp,
    gaps: std::vec::IntoIter<i64>,
}

impl Clock {
    fn tick(&mut self) -> Timestamp {
        self.now = self.now.plus_seconds(self.gaps.next().unwrap_or(1));
        self.now
    }
}

/// Objects satisfying every model invariant: 0–8 datastreams, 0–4
/// disseminators, 1–5 versions per component.
pub fn digital_object() -> impl Strategy<Value = DigitalObject> {
    let header = (
        prop::sample::select(ObjectKind::ALL.to_vec()),
        ("[a-z][a-z0-9-]{0,8}", 1u64..1_000_000_000_000).prop_map(|(ns, n)| Pid::new(&ns, n).unwrap()),
        text(),
        prop::collection::btree_map("[a-z][A-Za-z0-9]{0,8}", text(), 0..4),
        0i64..2_000_000_000,
        any::<bool>(),
        0i64..1000,
    );
    let body = (
        prop::collection::btree_set(component_id(), 0..=8),
        prop::collection::btree_set(component_id(), 0..=4),
        prop::collection::vec(prop::collection::vec((mime(), location()), 1..=5), 8),
        prop::collection::vec(prop::collection::vec(diss_version(), 1..=5), 4),
        prop::collection::vec(1i64..100_000, MAX_EVENTS),
        prop::collection::vec((text(), text()), MAX_EVENTS),
    );
    (header, body).prop_map(|(header, body)| {
        let (kind, pid, label, system_metadata, created, leading_ingest, tail) = header;
        let (mut ds_ids, diss_ids, ds_plans, diss_plans, gaps, notes) = body;
        build(
            kind,
            pid,
            label,
            system_metadata,
            Timestamp::from_unix(created),
            leading_ingest,
            tail,
            {
                if let Some(reserved) = kind.reserved_datastream() {
                    if ds_ids.len() == 8 {
                        let last = ds_ids.iter().next_back().cloned().unwrap();
                        ds_ids.remove(&last);
                    }
                    ds_ids.insert(reserved.to_owned());
                }
                ds_ids
            },
            diss_ids,
            ds_plans,
            diss_plans,
            gaps,
            notes,
        )
    })
}

#[allow(clippy::too_many_arguments)]
fn build(
    kind: ObjectKind,
    pid: Pid,
    label: String,
    system_metadata: BTreeMap<String, String>,
    created: Timestamp,
    leading_ingest: bool,
    tail: i64,
    ds_ids: BTreeSet<String>,
    diss_ids: BTreeSet<String>,
    ds_plans: Vec<Vec<DsVersionPlan>>,
    diss_plans: Vec<Vec<DissVersionPlan>>,
    gaps: Vec<i64>,
    notes: Vec<(String, String)>,
) -> DigitalObject {
    let mut obj = DigitalObject::new(pid, kind, label, created);
    obj.system_metadata = system_metadata;
    let mut clock = Clock {
        now: created,
        gaps: gaps.into_iter(),
    };
    let mut notes = notes.into_iter();
    let mut audit = |obj: &mut DigitalObject, action: AuditAction, component: &str, date: Timestamp| {
        let (responsible, justification) = notes.next().unwrap_or_default();
        let id = format!("audit{}", obj.audit_trail.len() + 1);
        obj.audit_trail.push(AuditRecord {
            id: id.clone(),
            action,
            component_id: component.to_owned(),
            responsible,
            date,
            justification,
        });
        id
    };
    if leading_ingest {
        audit(&mut obj, AuditAction::Ingest, "", created);
    }

    let ds_ids: Vec<ComponentId> = ds_ids.iter().map(|s| ComponentId::new(s).unwrap()).collect();
    let diss_ids: Vec<ComponentId> = diss_ids
        .iter()
        .filter(|id| !ds_ids.iter().any(|d| d.as_str() == id.as_str()))
        .map(|s| ComponentId::new(s).unwrap())
        .collect();

    // Versions are interleaved round by round so components age together.
    for round in 0..5 {
        for (id, plan) in ds_ids.iter().zip(&ds_plans) {
            let Some((mime_type, location)) = plan.get(round) else { continue };
            let date = clock.tick();
            let action = if round == 0 { AuditAction::AddDatastream } else { AuditAction::ModifyDatastream };
            let audit_id = audit(&mut obj, action, id.as_str(), date);
            let ds = obj.datastreams.entry(id.clone()).or_insert_with(|| Datastream {
                id: id.clone(),
                versions: Vec::new(),
            });
            ds.versions.insert(
                0,
                DatastreamVersion {
                    version_id: format!("{id}.{round}"),
                    created: date,
                    mime_type: mime_type.clone(),
                    location: location.clone(),
                    audit_id,
                },
            );
        }
        for (id, plan) in diss_ids.iter().zip(&diss_plans) {
            let Some((bdef, bmech, keys)) = plan.get(round) else { continue };
            let date = clock.tick();
            let action = if round == 0 { AuditAction::AddDisseminator } else { AuditAction::ModifyDisseminator };
            let audit_id = audit(&mut obj, action, id.as_str(), date);
            let bmech = if bdef == bmech {
                Pid::new(bmech.namespace(), bmech.serial() + 1).unwrap()
            } else {
                bmech.clone()
            };
            let binding_map = if ds_ids.is_empty() {
                BTreeMap::new()
            } else {
                keys.iter().map(|(k, i)| (k.clone(), ds_ids[i % ds_ids.len()].clone())).collect()
            };
            let diss = obj.disseminators.entry(id.clone()).or_insert_with(|| Disseminator {
                id: id.clone(),
                versions: Vec::new(),
            });
            diss.versions.insert(
                0,
                DisseminatorVersion {
                    version_id: format!("{id}.{round}"),
                    created: date,
                    bdef_pid: bdef.clone(),
                    bmech_pid: bmech,
                    binding_map,
                    audit_id,
                },
            );
        }
    }
    obj.modified = clock.now.plus_seconds(tail);
    debug_assert!(obj.invariant_violations().is_empty(), "{:?}", obj.invariant_violations());
    obj
}
