//! METS profile codec.
//!
//! A digital object is stored as one METS document:
//!
//! | object part            | METS element                                                     |
//! |------------------------|------------------------------------------------------------------|
//! | PID, kind, label       | `mets/@OBJID`, `mets/@TYPE`, `mets/@LABEL`                       |
//! | created / modified     | `metsHdr/@CREATEDATE`, `metsHdr/@LASTMODDATE`                    |
//! | system metadata        | `amdSec[@ID='SystemMetadata']/sysMeta/@NAME,@VALUE`              |
//! | audit trail            | `amdSec[@ID='AuditTrail']/digiprovMD/auditRecord`                |
//! | datastream             | `fileSec/fileGrp[@ID='Datastreams']/fileGrp[@ID=dsid]`           |
//! | datastream version     | `file[@ID,@SEQ,@CREATED,@MIMETYPE,@ADMID]/FLocat/@xlink:href`    |
//! | disseminator version   | `behaviorSec[@ID,@GROUPID,@CREATED,@ADMID,@STRUCTID]`            |
//! | binding map            | `structMap/div[@TYPE=key,@ORDER]/fptr/@FILEID`                   |
//!
//! Decoding and validation share one pass, so anything `validate_structure`
//! accepts is guaranteed to decode.

mod decode;
mod encode;

use serde::Serialize;

pub use decode::{decode_element, decode_object, decode_with_content, validate_element, validate_structure};
pub use encode::{encode_element, encode_object, encode_element_with_content, encode_object_with_content};

/// Namespace of the repository's METS profile.
pub const METS_NS: &str = "urn:dorepo:mets-profile:1";
pub const METS_PREFIX: &str = "METS";

pub(crate) const DATASTREAMS_GRP: &str = "Datastreams";
pub(crate) const SYSMETA_SEC: &str = "SystemMetadata";
pub(crate) const AUDIT_SEC: &str = "AuditTrail";
pub(crate) const STRUCTMAP_PREFIX: &str = "dsMap-";

/// The closed set of structural rule codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    BadRoot,
    MissingObjid,
    BadPid,
    UnknownKind,
    MissingAttribute,
    MissingElement,
    UnexpectedElement,
    BadTimestamp,
    DuplicateId,
    BadComponentId,
    BadVersionId,
    EmptyComponent,
    BadSeqOrder,
    BadLocation,
    InlineContentMismatch,
    DanglingAdmid,
    DanglingFileid,
    DanglingStructid,
    OrphanStructmap,
    BadBindingKey,
    DuplicateBindingKey,
    SameBdefBmech,
    BadAuditId,
    UnknownAction,
    MissingReservedDs,
}

impl ViolationCode {
    pub const ALL: [ViolationCode; 25] = [
        ViolationCode::BadRoot,
        ViolationCode::MissingObjid,
        ViolationCode::BadPid,
        ViolationCode::UnknownKind,
        ViolationCode::MissingAttribute,
        ViolationCode::MissingElement,
        ViolationCode::UnexpectedElement,
        ViolationCode::BadTimestamp,
        ViolationCode::DuplicateId,
        ViolationCode::BadComponentId,
        ViolationCode::BadVersionId,
        ViolationCode::EmptyComponent,
        ViolationCode::BadSeqOrder,
        ViolationCode::BadLocation,
        ViolationCode::InlineContentMismatch,
        ViolationCode::DanglingAdmid,
        ViolationCode::DanglingFileid,
        ViolationCode::DanglingStructid,
        ViolationCode::OrphanStructmap,
        ViolationCode::BadBindingKey,
        ViolationCode::DuplicateBindingKey,
        ViolationCode::SameBdefBmech,
        ViolationCode::BadAuditId,
        ViolationCode::UnknownAction,
        ViolationCode::MissingReservedDs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::BadRoot => "BAD_ROOT",
            ViolationCode::MissingObjid => "MISSING_OBJID",
            ViolationCode::BadPid => "BAD_PID",
            ViolationCode::UnknownKind => "UNKNOWN_KIND",
            ViolationCode::MissingAttribute => "MISSING_ATTRIBUTE",
            ViolationCode::MissingElement => "MISSING_ELEMENT",
            ViolationCode::UnexpectedElement => "UNEXPECTED_ELEMENT",
            ViolationCode::BadTimestamp => "BAD_TIMESTAMP",
            ViolationCode::DuplicateId => "DUPLICATE_ID",
            ViolationCode::BadComponentId => "BAD_COMPONENT_ID",
            ViolationCode::BadVersionId => "BAD_VERSION_ID",
            ViolationCode::EmptyComponent => "EMPTY_COMPONENT",
            ViolationCode::BadSeqOrder => "BAD_SEQ_ORDER",
            ViolationCode::BadLocation => "BAD_LOCATION",
            ViolationCode::InlineContentMismatch => "INLINE_CONTENT_MISMATCH",
            ViolationCode::DanglingAdmid => "DANGLING_ADMID",
            ViolationCode::DanglingFileid => "DANGLING_FILEID",
            ViolationCode::DanglingStructid => "DANGLING_STRUCTID",
            ViolationCode::OrphanStructmap => "ORPHAN_STRUCTMAP",
            ViolationCode::BadBindingKey => "BAD_BINDING_KEY",
            ViolationCode::DuplicateBindingKey => "DUPLICATE_BINDING_KEY",
            ViolationCode::SameBdefBmech => "SAME_BDEF_BMECH",
            ViolationCode::BadAuditId => "BAD_AUDIT_ID",
            ViolationCode::UnknownAction => "UNKNOWN_ACTION",
            ViolationCode::MissingReservedDs => "MISSING_RESERVED_DS",
        }
    }
}

impl std::fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StructuralViolation {
    pub code: ViolationCode,
    /// XPath-like pointer to the offending node.
    pub locator: String,
    pub message: String,
}

impl std::fmt::Display for StructuralViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} at {}: {}", self.code, self.locator, self.message)
    }
}
