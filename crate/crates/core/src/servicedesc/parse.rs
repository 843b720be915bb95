use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{
    placeholders, Binding, DescriptorError, MethodDef, MethodMap, ServiceBindings, UserParam, Verb,
    HTTP_NS, MIME_NS, SOAP_NS, SVC_NS, WSDL_NS,
};
use crate::error::Error;
use crate::model::{is_absolute_http_url, is_binding_key, Pid};
use crate::xml::{self, Element};

type Res<T> = Result<T, DescriptorError>;

struct Part {
    name: String,
    binding_key: bool,
    required: bool,
    default: Option<String>,
}

fn strip_prefix(qname: &str) -> &str {
    qname.rsplit_once(':').map_or(qname, |(_, l)| l)
}

fn loc(parent: &str, el: &Element) -> String {
    match el.get("name") {
        Some(n) => format!("{parent}/{}[@name='{n}']", el.local),
        None => format!("{parent}/{}", el.local),
    }
}

fn unsupported(at: &str, el: &Element) -> DescriptorError {
    let what = if el.ns.as_deref() == Some(SOAP_NS) {
        format!("SOAP construct {} is not supported; only HTTP GET/POST bindings are", el.qname)
    } else {
        format!("unsupported construct {}", el.qname)
    };
    DescriptorError::new(loc(at, el), what)
}

fn required_attr<'e>(el: &'e Element, at: &str, name: &str) -> Res<&'e str> {
    el.get(name)
        .ok_or_else(|| DescriptorError::new(format!("{at}/@{name}"), format!("{} requires {name}", el.local)))
}

fn root(descriptor: &[u8]) -> Result<Element, Error> {
    let root = xml::parse(descriptor)?;
    if !root.is(WSDL_NS, "definitions") {
        return Err(DescriptorError::new(format!("/{}", root.qname), "root must be wsdl:definitions").into());
    }
    Ok(root)
}

/// Abstract side shared by both descriptor kinds.
struct Abstract {
    port_type: String,
    methods: BTreeMap<String, MethodDef>,
}

fn parse_abstract(root: &Element) -> Res<Abstract> {
    let mut messages: HashMap<String, Vec<Part>> = HashMap::new();
    for msg in root.children_named(WSDL_NS, "message") {
        let at = loc("/definitions", msg);
        let name = required_attr(msg, &at, "name")?;
        let mut parts: Vec<Part> = Vec::new();
        for part in &msg.children {
            let pat = loc(&at, part);
            if !part.is(WSDL_NS, "part") {
                return Err(unsupported(&at, part));
            }
            let pname = required_attr(part, &pat, "name")?;
            if !is_binding_key(pname) {
                return Err(DescriptorError::new(pat, format!("part name {pname:?} must match [A-Z][A-Z0-9_]*")));
            }
            if parts.iter().any(|p| p.name == pname) {
                return Err(DescriptorError::new(pat, format!("part {pname} declared twice")));
            }
            let binding_key = part.get("type").map(strip_prefix) == Some("datastream");
            let required = match part.get_ns(SVC_NS, "required") {
                None | Some("false") => false,
                Some("true") => true,
                Some(other) => {
                    return Err(DescriptorError::new(format!("{pat}/@svc:required"), format!("{other:?} is not a boolean")))
                }
            };
            let default = part.get_ns(SVC_NS, "default").map(str::to_owned);
            if binding_key && (required || default.is_some()) {
                return Err(DescriptorError::new(pat, "datastream parts take no required/default flags"));
            }
            parts.push(Part {
                name: pname.to_owned(),
                binding_key,
                required,
                default,
            });
        }
        if messages.insert(name.to_owned(), parts).is_some() {
            return Err(DescriptorError::new(at, format!("message {name} declared twice")));
        }
    }

    let mut port_types = root.children_named(WSDL_NS, "portType");
    let pt = match (port_types.next(), port_types.next()) {
        (Some(pt), None) => pt,
        (None, _) => return Err(DescriptorError::new("/definitions/portType", "a portType is required")),
        (Some(_), Some(_)) => return Err(DescriptorError::new("/definitions/portType", "only one portType is supported")),
    };
    let pat = loc("/definitions", pt);
    let port_type = required_attr(pt, &pat, "name")?.to_owned();
    let mut methods = BTreeMap::new();
    for op in &pt.children {
        let oat = loc(&pat, op);
        if !op.is(WSDL_NS, "operation") {
            return Err(unsupported(&pat, op));
        }
        let name = required_attr(op, &oat, "name")?;
        let mut method = MethodDef {
            name: name.to_owned(),
            user_params: Vec::new(),
            binding_keys: Vec::new(),
        };
        for io in &op.children {
            if io.is(WSDL_NS, "output") {
                continue;
            }
            if !io.is(WSDL_NS, "input") {
                return Err(unsupported(&oat, io));
            }
            let msg_name = strip_prefix(required_attr(io, &format!("{oat}/input"), "message")?);
            let parts = messages.get(msg_name).ok_or_else(|| {
                DescriptorError::new(format!("{oat}/input/@message"), format!("no message named {msg_name}"))
            })?;
            for p in parts {
                if p.binding_key {
                    method.binding_keys.push(p.name.clone());
                } else {
                    method.user_params.push(UserParam {
                        name: p.name.clone(),
                        required: p.required,
                        default: p.default.clone(),
                    });
                }
            }
        }
        if methods.insert(name.to_owned(), method).is_some() {
            return Err(DescriptorError::new(oat, format!("operation {name} declared twice")));
        }
    }
    if methods.is_empty() {
        return Err(DescriptorError::new(pat, "a behavior definition must declare at least one operation"));
    }
    Ok(Abstract { port_type, methods })
}

fn check_children(root: &Element, allowed: &[(&str, &str)]) -> Res<()> {
    for c in &root.children {
        if !allowed.iter().any(|(ns, local)| c.is(ns, local)) {
            return Err(unsupported("/definitions", c));
        }
    }
    Ok(())
}

/// Parses the abstract method map of a behavior definition.
pub fn parse_method_map(descriptor: &[u8]) -> Result<MethodMap, Error> {
    let root = root(descriptor)?;
    check_children(&root, &[(WSDL_NS, "message"), (WSDL_NS, "portType")])?;
    let abs = parse_abstract(&root)?;
    Ok(MethodMap { methods: abs.methods })
}

/// Parses the concrete HTTP bindings of a behavior mechanism.
pub fn parse_bindings(descriptor: &[u8]) -> Result<ServiceBindings, Error> {
    let root = root(descriptor)?;
    check_children(
        &root,
        &[
            (WSDL_NS, "message"),
            (WSDL_NS, "portType"),
            (WSDL_NS, "binding"),
            (WSDL_NS, "service"),
            (SVC_NS, "implements"),
        ],
    )?;
    Ok(parse_concrete(&root)?)
}

fn exactly_one<'e>(root: &'e Element, ns: &'e str, local: &'e str, what: &str) -> Res<&'e Element> {
    let mut it = root.children_named(ns, local);
    match (it.next(), it.next()) {
        (Some(el), None) => Ok(el),
        (None, _) => Err(DescriptorError::new(format!("/definitions/{local}"), format!("{what} is required"))),
        _ => Err(DescriptorError::new(format!("/definitions/{local}"), format!("only one {what} is supported"))),
    }
}

fn parse_concrete(root: &Element) -> Res<ServiceBindings> {
    let implements = exactly_one(root, SVC_NS, "implements", "an svc:implements reference to the behavior definition")?;
    let raw = implements
        .get("bdef")
        .ok_or_else(|| DescriptorError::new("/definitions/implements/@bdef", "missing behavior definition PID"))?;
    let implements_bdef: Pid = raw
        .parse()
        .map_err(|e: Error| DescriptorError::new("/definitions/implements/@bdef", e.to_string()))?;

    let abs = parse_abstract(root)?;

    let binding = exactly_one(root, WSDL_NS, "binding", "a binding")?;
    let bat = loc("/definitions", binding);
    let binding_name = required_attr(binding, &bat, "name")?;
    let bound_type = strip_prefix(required_attr(binding, &bat, "type")?);
    if bound_type != abs.port_type {
        return Err(DescriptorError::new(
            format!("{bat}/@type"),
            format!("binding refers to portType {bound_type}, descriptor declares {}", abs.port_type),
        ));
    }

    let mut default_verb = None;
    let mut ops = Vec::new();
    for c in &binding.children {
        if c.is(HTTP_NS, "binding") {
            let verb = required_attr(c, &format!("{bat}/binding"), "verb")?;
            default_verb = Some(
                Verb::parse(verb)
                    .ok_or_else(|| DescriptorError::new(format!("{bat}/binding/@verb"), format!("verb {verb:?} is not GET or POST")))?,
            );
        } else if c.is(WSDL_NS, "operation") {
            ops.push(c);
        } else {
            return Err(unsupported(&bat, c));
        }
    }
    let default_verb = default_verb
        .ok_or_else(|| DescriptorError::new(format!("{bat}/http:binding"), "an http:binding verb is required"))?;

    let service = exactly_one(root, WSDL_NS, "service", "a service")?;
    let sat = loc("/definitions", service);
    let mut ports = service.children.iter();
    let port = match (ports.next(), ports.next()) {
        (Some(p), None) if p.is(WSDL_NS, "port") => p,
        _ => return Err(DescriptorError::new(sat, "service must hold exactly one port")),
    };
    let pat = loc(&sat, port);
    if strip_prefix(required_attr(port, &pat, "binding")?) != binding_name {
        return Err(DescriptorError::new(format!("{pat}/@binding"), format!("port must use binding {binding_name}")));
    }
    let mut addrs = port.children.iter();
    let base = match (addrs.next(), addrs.next()) {
        (Some(a), None) if a.is(HTTP_NS, "address") => required_attr(a, &format!("{pat}/address"), "location")?,
        _ => return Err(DescriptorError::new(pat, "port must hold exactly one http:address")),
    };

    let mut bindings = BTreeMap::new();
    for op in ops {
        let oat = loc(&bat, op);
        let name = required_attr(op, &oat, "name")?;
        let method = abs
            .methods
            .get(name)
            .ok_or_else(|| DescriptorError::new(oat.clone(), format!("{name} is not an operation of {}", abs.port_type)))?;
        let mut location = None;
        let mut verb = default_verb;
        let mut expected_mime = "*/*".to_owned();
        for c in &op.children {
            if c.is(HTTP_NS, "operation") {
                location = Some(required_attr(c, &format!("{oat}/operation"), "location")?);
                if let Some(v) = c.get_ns(SVC_NS, "verb") {
                    verb = Verb::parse(v).ok_or_else(|| {
                        DescriptorError::new(format!("{oat}/operation/@svc:verb"), format!("verb {v:?} is not GET or POST"))
                    })?;
                }
            } else if c.is(WSDL_NS, "output") {
                let mut content = c.children.iter();
                match (content.next(), content.next()) {
                    (Some(m), None) if m.is(MIME_NS, "content") => {
                        expected_mime = required_attr(m, &format!("{oat}/output/content"), "type")?.to_owned();
                    }
                    (None, _) => {}
                    _ => return Err(DescriptorError::new(format!("{oat}/output"), "output holds one mime:content")),
                }
            } else if c.is(WSDL_NS, "input") {
                // Inputs are fully described by the portType.
            } else {
                return Err(unsupported(&oat, c));
            }
        }
        let location = location.ok_or_else(|| DescriptorError::new(oat.clone(), "http:operation location required"))?;
        let url_template = if is_absolute_http_url(location) {
            location.to_owned()
        } else {
            format!("{base}{location}")
        };
        if !is_absolute_http_url(&url_template) {
            return Err(DescriptorError::new(oat, format!("{url_template:?} is not an absolute http(s) URL")));
        }
        check_placeholders(&oat, &url_template, method)?;
        let b = Binding {
            method: method.clone(),
            verb,
            url_template,
            expected_mime,
        };
        if bindings.insert(name.to_owned(), b).is_some() {
            return Err(DescriptorError::new(oat, format!("{name} bound twice")));
        }
    }
    if let Some(missing) = abs.methods.keys().find(|m| !bindings.contains_key(*m)) {
        return Err(DescriptorError::new(bat, format!("operation {missing} has no binding")));
    }
    Ok(ServiceBindings {
        implements_bdef,
        bindings,
    })
}

/// Placeholders must be exactly the method's binding keys and user parameters.
fn check_placeholders(at: &str, template: &str, method: &MethodDef) -> Res<()> {
    let used: BTreeSet<&str> = placeholders(template).into_iter().map(|(_, n)| n).collect();
    let declared: BTreeSet<&str> = method
        .binding_keys
        .iter()
        .map(String::as_str)
        .chain(method.user_params.iter().map(|p| p.name.as_str()))
        .collect();
    if let Some(extra) = used.difference(&declared).next() {
        return Err(DescriptorError::new(
            format!("{at}/operation/@location"),
            format!("unknown placeholder ({extra})"),
        ));
    }
    if let Some(unused) = declared.difference(&used).next() {
        return Err(DescriptorError::new(
            format!("{at}/operation/@location"),
            format!("declared input {unused} never appears in the template"),
        ));
    }
    Ok(())
}
