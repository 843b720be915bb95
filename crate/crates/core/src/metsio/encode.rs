use base64::Engine;

use super::{AUDIT_SEC, DATASTREAMS_GRP, METS_NS, METS_PREFIX, STRUCTMAP_PREFIX, SYSMETA_SEC};
use crate::error::Error;
use crate::model::{ContentKey, ContentLocation, DigitalObject, DisseminatorVersion};
use crate::xml::{Element, XLINK_NS};

fn mets(local: &str) -> Element {
    Element::new(METS_NS, METS_PREFIX, local)
}

/// Canonical METS bytes for an object. Pure: equal objects give equal bytes.
pub fn encode_object(object: &DigitalObject) -> Vec<u8> {
    encode_element(object).to_document()
}

/// Like [`encode_object`], but internal datastream versions also carry their
/// bytes inline (`FContent/binData`) so the document is self-contained.
pub fn encode_object_with_content<F>(object: &DigitalObject, content: F) -> Result<Vec<u8>, Error>
where
    F: FnMut(&ContentKey) -> Result<Vec<u8>, Error>,
{
    Ok(encode_element_with_content(object, content)?.to_document())
}

pub fn encode_element_with_content<F>(object: &DigitalObject, mut content: F) -> Result<Element, Error>
where
    F: FnMut(&ContentKey) -> Result<Vec<u8>, Error>,
{
    let mut root = encode_element(object);
    let engine = base64::engine::general_purpose::STANDARD;
    let file_sec = root
        .first_child_mut(METS_NS, "fileSec")
        .and_then(|s| s.first_child_mut(METS_NS, "fileGrp"))
        .expect("encoder always emits the datastream group");
    for grp in &mut file_sec.children {
        for file in &mut grp.children {
            let href = file.children[0]
                .get_ns(XLINK_NS, "href")
                .expect("encoder always emits FLocat href")
                .to_owned();
            if let Ok(ContentLocation::Internal(key)) = ContentLocation::parse(&href) {
                let bytes = content(&key)?;
                file.children.push(
                    mets("FContent").child(mets("binData").text(engine.encode(bytes))),
                );
            }
        }
    }
    Ok(root)
}

pub fn encode_element(object: &DigitalObject) -> Element {
    let mut root = mets("mets")
        .attr("xmlns:METS", METS_NS)
        .attr("xmlns:xlink", XLINK_NS)
        .attr("OBJID", object.pid.to_string())
        .attr("TYPE", object.kind.token())
        .attr("LABEL", object.label.as_str());

    root = root.child(
        mets("metsHdr")
            .attr("CREATEDATE", object.created.to_string())
            .attr("LASTMODDATE", object.modified.to_string()),
    );

    let mut sysmeta = mets("amdSec").attr("ID", SYSMETA_SEC);
    for (name, value) in &object.system_metadata {
        sysmeta = sysmeta.child(mets("sysMeta").attr("NAME", name.as_str()).attr("VALUE", value.as_str()));
    }
    root = root.child(sysmeta);

    let mut audit = mets("amdSec").attr("ID", AUDIT_SEC);
    for rec in &object.audit_trail {
        audit = audit.child(
            mets("digiprovMD").attr("ID", rec.id.as_str()).child(
                mets("auditRecord")
                    .attr("ACTION", rec.action.token())
                    .attr("COMPONENT", rec.component_id.as_str())
                    .attr("DATE", rec.date.to_string())
                    .attr("JUSTIFICATION", rec.justification.as_str())
                    .attr("RESPONSIBLE", rec.responsible.as_str()),
            ),
        );
    }
    root = root.child(audit);

    let mut datastreams = mets("fileGrp").attr("ID", DATASTREAMS_GRP);
    for ds in object.datastreams.values() {
        let mut grp = mets("fileGrp").attr("ID", ds.id.as_str());
        for (i, v) in ds.versions.iter().enumerate() {
            grp = grp.child(
                mets("file")
                    .attr("ID", v.version_id.as_str())
                    .attr("SEQ", (i + 1).to_string())
                    .attr("CREATED", v.created.to_string())
                    .attr("MIMETYPE", v.mime_type.as_str())
                    .attr("ADMID", v.audit_id.as_str())
                    .child(
                        mets("FLocat")
                            .attr("LOCTYPE", "URL")
                            .ns_attr(XLINK_NS, "xlink", "href", v.location.to_string()),
                    ),
            );
        }
        datastreams = datastreams.child(grp);
    }
    root = root.child(mets("fileSec").child(datastreams));

    let diss_versions: Vec<&DisseminatorVersion> = object
        .disseminators
        .values()
        .flat_map(|d| d.versions.iter())
        .collect();
    for v in &diss_versions {
        let mut map = mets("structMap").attr("ID", structmap_id(&v.version_id));
        for (order, (key, dsid)) in v.binding_map.iter().enumerate() {
            map = map.child(
                mets("div")
                    .attr("TYPE", key.as_str())
                    .attr("ORDER", (order + 1).to_string())
                    .child(mets("fptr").attr("FILEID", dsid.as_str())),
            );
        }
        root = root.child(map);
    }
    for d in object.disseminators.values() {
        for v in &d.versions {
            root = root.child(
                mets("behaviorSec")
                    .attr("ID", v.version_id.as_str())
                    .attr("GROUPID", d.id.as_str())
                    .attr("CREATED", v.created.to_string())
                    .attr("ADMID", v.audit_id.as_str())
                    .attr("STRUCTID", structmap_id(&v.version_id))
                    .child(mets("interfaceDef").ns_attr(XLINK_NS, "xlink", "simpleLink", v.bdef_pid.to_string()))
                    .child(mets("mechanism").ns_attr(XLINK_NS, "xlink", "simpleLink", v.bmech_pid.to_string())),
            );
        }
    }
    root
}

fn structmap_id(version_id: &str) -> String {
    format!("{STRUCTMAP_PREFIX}{version_id}")
}
