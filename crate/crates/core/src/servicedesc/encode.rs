use super::{MethodDef, MethodMap, ServiceBindings, Verb, DATASTREAM_PART_TYPE, HTTP_NS, MIME_NS, SVC_NS, WSDL_NS};
use crate::model::is_absolute_http_url;
use crate::xml::Element;

const PORT_TYPE: &str = "BehaviorPortType";
const BINDING: &str = "HttpBinding";

fn wsdl(local: &str) -> Element {
    Element::new(WSDL_NS, "wsdl", local)
}

fn definitions(name: &str) -> Element {
    wsdl("definitions")
        .attr("xmlns:wsdl", WSDL_NS)
        .attr("xmlns:http", HTTP_NS)
        .attr("xmlns:mime", MIME_NS)
        .attr("xmlns:svc", SVC_NS)
        .attr("xmlns:xsd", "http://www.w3.org/2001/XMLSchema")
        .attr("name", name)
}

fn abstract_side(mut root: Element, methods: &[&MethodDef]) -> Element {
    for m in methods {
        let mut msg = wsdl("message").attr("name", format!("{}Request", m.name));
        for k in &m.binding_keys {
            msg = msg.child(wsdl("part").attr("name", k.as_str()).attr("type", DATASTREAM_PART_TYPE));
        }
        for p in &m.user_params {
            let mut part = wsdl("part").attr("name", p.name.as_str()).attr("type", "xsd:string");
            if p.required {
                part = part.ns_attr(SVC_NS, "svc", "required", "true");
            }
            if let Some(d) = &p.default {
                part = part.ns_attr(SVC_NS, "svc", "default", d.as_str());
            }
            msg = msg.child(part);
        }
        root = root.child(msg);
    }
    let mut pt = wsdl("portType").attr("name", PORT_TYPE);
    for m in methods {
        pt = pt.child(
            wsdl("operation")
                .attr("name", m.name.as_str())
                .child(wsdl("input").attr("message", format!("{}Request", m.name))),
        );
    }
    root.child(pt)
}

pub fn encode_method_map(map: &MethodMap, name: &str) -> Vec<u8> {
    let methods: Vec<&MethodDef> = map.methods.values().collect();
    abstract_side(definitions(name), &methods).to_document()
}

/// `scheme://host[:port]/` of a URL, used as the service base address.
fn origin(url: &str) -> &str {
    let after_scheme = url.find("://").map_or(0, |i| i + 3);
    match url[after_scheme..].find('/') {
        Some(i) => &url[..after_scheme + i + 1],
        None => url,
    }
}

pub fn encode_bindings(sb: &ServiceBindings, name: &str) -> Vec<u8> {
    let methods: Vec<&MethodDef> = sb.bindings.values().map(|b| &b.method).collect();
    let mut root = definitions(name).child(
        Element::new(SVC_NS, "svc", "implements").attr("bdef", sb.implements_bdef.to_string()),
    );
    root = abstract_side(root, &methods);

    let first = sb.bindings.values().next();
    let default_verb = first.map_or(Verb::Get, |b| b.verb);
    let base = first.map_or("", |b| origin(&b.url_template)).to_owned();

    let mut binding = wsdl("binding")
        .attr("name", BINDING)
        .attr("type", PORT_TYPE)
        .child(Element::new(HTTP_NS, "http", "binding").attr("verb", default_verb.as_str()));
    for (name, b) in &sb.bindings {
        // Relative to the base address unless that would read back differently.
        let location = match b.url_template.strip_prefix(base.as_str()) {
            Some(rel) if !base.is_empty() && !is_absolute_http_url(rel) => rel,
            _ => b.url_template.as_str(),
        };
        let mut op = Element::new(HTTP_NS, "http", "operation").attr("location", location);
        if b.verb != default_verb {
            op = op.ns_attr(SVC_NS, "svc", "verb", b.verb.as_str());
        }
        let mut wop = wsdl("operation").attr("name", name.as_str()).child(op);
        if b.expected_mime != "*/*" {
            wop = wop.child(
                wsdl("output").child(Element::new(MIME_NS, "mime", "content").attr("type", b.expected_mime.as_str())),
            );
        }
        binding = binding.child(wop);
    }
    root = root.child(binding);
    root = root.child(
        wsdl("service").attr("name", name).child(
            wsdl("port")
                .attr("name", format!("{name}Port"))
                .attr("binding", BINDING)
                .child(Element::new(HTTP_NS, "http", "address").attr("location", base)),
        ),
    );
    root.to_document()
}
