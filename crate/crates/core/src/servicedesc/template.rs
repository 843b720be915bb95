use std::collections::BTreeMap;

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::Serialize;

use super::{Binding, Verb};
use crate::error::Error;
use crate::model::is_binding_key;

/// Everything but RFC 3986 unreserved characters.
const USER_ARG: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

/// A fully substituted request ready for dispatch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConcreteRequest {
    pub verb: Verb,
    pub url: String,
    pub expected_mime: String,
}

/// `(NAME)` placeholders in a template, as `(byte range, name)` in order.
pub fn placeholders(template: &str) -> Vec<(std::ops::Range<usize>, &str)> {
    let mut out = Vec::new();
    let mut rest = 0;
    while let Some(open) = template[rest..].find('(').map(|i| i + rest) {
        match template[open + 1..].find(')').map(|i| i + open + 1) {
            Some(close) if is_binding_key(&template[open + 1..close]) => {
                out.push((open..close + 1, &template[open + 1..close]));
                rest = close + 1;
            }
            _ => rest = open + 1,
        }
    }
    out
}

/// Fills a binding template. Binding-key values are repository URLs and go in
/// verbatim; user arguments are percent-encoded. Optional parameters fall back
/// to their default, or to the empty string.
pub fn instantiate_binding(
    binding: &Binding,
    key_values: &BTreeMap<String, String>,
    user_args: &BTreeMap<String, String>,
) -> Result<ConcreteRequest, Error> {
    let method = &binding.method;
    if let Some(missing) = method.binding_keys.iter().find(|k| !key_values.contains_key(*k)) {
        return Err(Error::MissingBindingKey(missing.clone()));
    }
    if let Some(missing) = method
        .user_params
        .iter()
        .find(|p| p.required && p.default.is_none() && !user_args.contains_key(&p.name))
    {
        return Err(Error::MissingRequiredParam(missing.name.clone()));
    }

    let template = &binding.url_template;
    let mut url = String::with_capacity(template.len() + 64);
    let mut last = 0;
    for (range, name) in placeholders(template) {
        url.push_str(&template[last..range.start]);
        if let Some(v) = key_values.get(name).filter(|_| method.binding_keys.iter().any(|k| k == name)) {
            url.push_str(v);
        } else if let Some(p) = method.user_param(name) {
            let value = user_args
                .get(name)
                .or(p.default.as_ref())
                .map(String::as_str)
                .unwrap_or("");
            url.extend(utf8_percent_encode(value, USER_ARG));
        } else {
            return Err(Error::BindingIntegrity(format!(
                "placeholder ({name}) is neither a binding key nor a parameter of {}",
                method.name
            )));
        }
        last = range.end;
    }
    url.push_str(&template[last..]);
    Ok(ConcreteRequest {
        verb: binding.verb,
        url,
        expected_mime: binding.expected_mime.clone(),
    })
}
