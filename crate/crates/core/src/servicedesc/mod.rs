//! Service descriptors: the WSDL subset stored in behavior definition
//! (`METHODMAP`) and behavior mechanism (`SERVICEBINDINGS`) objects.
//!
//! Accepted constructs are `definitions`, `message/part`, `portType/operation`,
//! one `binding` carrying `http:binding`, and one `service/port` carrying
//! `http:address`, plus the `svc:implements` extension naming the behavior
//! definition a mechanism implements. Anything else is refused.

mod encode;
mod parse;
mod template;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::model::Pid;

pub use encode::{encode_bindings, encode_method_map};
pub use parse::{parse_bindings, parse_method_map};
pub use template::{instantiate_binding, placeholders, ConcreteRequest};

pub const WSDL_NS: &str = "http://schemas.xmlsoap.org/wsdl/";
pub const HTTP_NS: &str = "http://schemas.xmlsoap.org/wsdl/http/";
pub const MIME_NS: &str = "http://schemas.xmlsoap.org/wsdl/mime/";
pub const SOAP_NS: &str = "http://schemas.xmlsoap.org/wsdl/soap/";
pub const SVC_NS: &str = "urn:dorepo:service-descriptor:1";

/// Part type marking a message part as a datastream binding key.
pub const DATASTREAM_PART_TYPE: &str = "svc:datastream";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UserParam {
    pub name: String,
    pub required: bool,
    pub default: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MethodDef {
    pub name: String,
    pub user_params: Vec<UserParam>,
    pub binding_keys: Vec<String>,
}

impl MethodDef {
    pub fn user_param(&self, name: &str) -> Option<&UserParam> {
        self.user_params.iter().find(|p| p.name == name)
    }

    /// The caller-facing signature: name plus user parameters, order-insensitive.
    pub fn signature(&self) -> (String, Vec<UserParam>) {
        let mut params = self.user_params.clone();
        params.sort_by(|a, b| a.name.cmp(&b.name));
        (self.name.clone(), params)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct MethodMap {
    pub methods: BTreeMap<String, MethodDef>,
}

impl MethodMap {
    pub fn get(&self, name: &str) -> Option<&MethodDef> {
        self.methods.get(name)
    }

    /// True when both maps offer the same methods with the same user parameters.
    pub fn same_signatures(&self, other: &MethodMap) -> bool {
        self.methods.len() == other.methods.len()
            && self
                .methods
                .iter()
                .all(|(name, m)| other.methods.get(name).is_some_and(|o| o.signature() == m.signature()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Verb {
    #[serde(rename = "GET")]
    Get,
    #[serde(rename = "POST")]
    Post,
}

impl Verb {
    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Get => "GET",
            Verb::Post => "POST",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "GET" => Some(Verb::Get),
            "POST" => Some(Verb::Post),
            _ => None,
        }
    }
}

/// Concrete HTTP binding of one method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Binding {
    pub method: MethodDef,
    pub verb: Verb,
    /// Absolute URL with `(KEY)` placeholders.
    pub url_template: String,
    /// Media type the service promises; `*/*` when unspecified.
    pub expected_mime: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ServiceBindings {
    pub implements_bdef: Pid,
    pub bindings: BTreeMap<String, Binding>,
}

impl ServiceBindings {
    /// The abstract side declared by the mechanism itself.
    pub fn method_map(&self) -> MethodMap {
        MethodMap {
            methods: self
                .bindings
                .iter()
                .map(|(k, b)| (k.clone(), b.method.clone()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
pub struct DescriptorError {
    pub locator: String,
    pub message: String,
}

impl DescriptorError {
    pub(crate) fn new(locator: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            locator: locator.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for DescriptorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "service descriptor error at {}: {}", self.locator, self.message)
    }
}
