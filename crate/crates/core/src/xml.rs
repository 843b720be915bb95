//! Small namespace-aware element tree with a canonical writer.
//!
//! Canonical form: UTF-8, XML declaration, attributes sorted by qualified
//! name, two-space indentation, LF line endings, self-closing empty elements.
//! Mixed content is not supported: an element holds either text or children.

use quick_xml::escape::resolve_predefined_entity;
use quick_xml::events::{BytesStart, Event};
use quick_xml::name::ResolveResult;
use quick_xml::NsReader;

use crate::error::Error;

pub const XLINK_NS: &str = "http://www.w3.org/1999/xlink";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub ns: Option<String>,
    pub local: String,
    pub qname: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub ns: Option<String>,
    pub local: String,
    pub qname: String,
    pub attrs: Vec<Attribute>,
    pub children: Vec<Element>,
    pub text: String,
}

impl Element {
    /// Builds an element in namespace `ns`, written with `prefix`.
    pub fn new(ns: &str, prefix: &str, local: &str) -> Self {
        Self {
            ns: Some(ns.to_owned()),
            local: local.to_owned(),
            qname: format!("{prefix}:{local}"),
            attrs: Vec::new(),
            children: Vec::new(),
            text: String::new(),
        }
    }

    /// Adds an unqualified attribute (or a namespace declaration).
    pub fn attr(mut self, name: &str, value: impl Into<String>) -> Self {
        self.attrs.push(Attribute {
            ns: None,
            local: name.to_owned(),
            qname: name.to_owned(),
            value: value.into(),
        });
        self
    }

    pub fn ns_attr(mut self, ns: &str, prefix: &str, local: &str, value: impl Into<String>) -> Self {
        self.attrs.push(Attribute {
            ns: Some(ns.to_owned()),
            local: local.to_owned(),
            qname: format!("{prefix}:{local}"),
            value: value.into(),
        });
        self
    }

    pub fn child(mut self, child: Element) -> Self {
        self.children.push(child);
        self
    }

    pub fn text(mut self, text: impl Into<String>) -> Self {
        self.text = text.into();
        self
    }

    pub fn is(&self, ns: &str, local: &str) -> bool {
        self.ns.as_deref() == Some(ns) && self.local == local
    }

    /// Value of an unqualified attribute.
    pub fn get(&self, local: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|a| a.ns.is_none() && a.local == local)
            .map(|a| a.value.as_str())
    }

    pub fn get_ns(&self, ns: &str, local: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|a| a.ns.as_deref() == Some(ns) && a.local == local)
            .map(|a| a.value.as_str())
    }

    pub fn children_named<'a>(&'a self, ns: &'a str, local: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.children.iter().filter(move |c| c.is(ns, local))
    }

    pub fn first_child(&self, ns: &str, local: &str) -> Option<&Element> {
        self.children.iter().find(|c| c.is(ns, local))
    }

    pub fn first_child_mut(&mut self, ns: &str, local: &str) -> Option<&mut Element> {
        self.children.iter_mut().find(|c| c.is(ns, local))
    }

    /// Serializes the tree as a canonical document.
    pub fn to_document(&self) -> Vec<u8> {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        self.write_into(&mut out, 0);
        out.into_bytes()
    }

    fn write_into(&self, out: &mut String, depth: usize) {
        for _ in 0..depth {
            out.push_str("  ");
        }
        out.push('<');
        out.push_str(&self.qname);
        let mut attrs: Vec<&Attribute> = self.attrs.iter().collect();
        attrs.sort_by(|a, b| a.qname.cmp(&b.qname));
        for a in attrs {
            out.push(' ');
            out.push_str(&a.qname);
            out.push_str("=\"");
            escape_attr(&a.value, out);
            out.push('"');
        }
        if self.children.is_empty() && self.text.is_empty() {
            out.push_str("/>\n");
            return;
        }
        out.push('>');
        if self.children.is_empty() {
            escape_text(&self.text, out);
        } else {
            out.push('\n');
            for c in &self.children {
                c.write_into(out, depth + 1);
            }
            for _ in 0..depth {
                out.push_str("  ");
            }
        }
        out.push_str("</");
        out.push_str(&self.qname);
        out.push_str(">\n");
    }
}

fn escape_attr(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
}

fn escape_text(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
}

/// True when `c` may appear in an XML 1.0 document.
pub fn is_xml_char(c: char) -> bool {
    matches!(c, '\t' | '\n' | '\r' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}' | '\u{10000}'..='\u{10FFFF}')
}

fn parse_err(e: impl std::fmt::Display) -> Error {
    Error::XmlParse(e.to_string())
}

/// Parses a document into its root element. DOCTYPE declarations are refused.
pub fn parse(bytes: &[u8]) -> Result<Element, Error> {
    let text = std::str::from_utf8(bytes).map_err(|e| parse_err(format!("not UTF-8: {e}")))?;
    let mut reader = NsReader::from_str(text);
    let cfg = reader.config_mut();
    cfg.expand_empty_elements = true;
    cfg.check_end_names = true;

    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;
    loop {
        let event = match reader.read_resolved_event() {
            Ok((_, event)) => event,
            Err(e) => {
                let e = e.to_string();
                return Err(parse_err(format!("at byte {}: {e}", reader.buffer_position())));
            }
        };
        match event {
            Event::Start(start) => {
                if root.is_some() {
                    return Err(parse_err("content after the root element"));
                }
                let el = start_element(&reader, &start)?;
                stack.push(el);
            }
            Event::End(_) => {
                let done = stack.pop().ok_or_else(|| parse_err("unbalanced end tag"))?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(done),
                    None => root = Some(done),
                }
            }
            Event::Text(t) => {
                let s = t.xml10_content().map_err(parse_err)?;
                push_text(&mut stack, &s)?;
            }
            Event::CData(t) => {
                let s = t.decode().map_err(parse_err)?;
                push_text(&mut stack, &s)?;
            }
            Event::GeneralRef(r) => {
                let s = if r.is_char_ref() {
                    r.resolve_char_ref()
                        .map_err(parse_err)?
                        .ok_or_else(|| parse_err("bad character reference"))?
                        .to_string()
                } else {
                    let name = r.decode().map_err(parse_err)?;
                    resolve_predefined_entity(&name)
                        .ok_or_else(|| parse_err(format!("undefined entity &{name};")))?
                        .to_owned()
                };
                push_text(&mut stack, &s)?;
            }
            Event::DocType(_) => return Err(parse_err("DOCTYPE declarations are not accepted")),
            Event::Empty(_) => unreachable!("empty elements are expanded"),
            Event::Comment(_) | Event::Decl(_) | Event::PI(_) => {}
            Event::Eof => break,
        }
    }
    if !stack.is_empty() {
        return Err(parse_err("unexpected end of document"));
    }
    let mut root = root.ok_or_else(|| parse_err("no root element"))?;
    drop_whitespace(&mut root);
    Ok(root)
}

fn push_text(stack: &mut [Element], s: &str) -> Result<(), Error> {
    match stack.last_mut() {
        Some(el) => {
            el.text.push_str(s);
            Ok(())
        }
        None if s.trim().is_empty() => Ok(()),
        None => Err(parse_err("text outside the root element")),
    }
}

/// Indentation between child elements is not content.
fn drop_whitespace(el: &mut Element) {
    if !el.children.is_empty() && el.text.trim().is_empty() {
        el.text.clear();
    }
    for c in &mut el.children {
        drop_whitespace(c);
    }
}

fn start_element(reader: &NsReader<&[u8]>, start: &BytesStart<'_>) -> Result<Element, Error> {
    let (ns, local) = reader.resolve_element(start.name());
    let ns = resolved(ns, start.name().as_ref())?;
    let mut el = Element {
        ns,
        local: String::from_utf8_lossy(local.as_ref()).into_owned(),
        qname: String::from_utf8_lossy(start.name().as_ref()).into_owned(),
        attrs: Vec::new(),
        children: Vec::new(),
        text: String::new(),
    };
    for attr in start.attributes() {
        let attr = attr.map_err(parse_err)?;
        let key = attr.key;
        if key.as_namespace_binding().is_some() {
            continue;
        }
        let (ans, alocal) = reader.resolve_attribute(key);
        let ans = resolved(ans, key.as_ref())?;
        let value = attr.unescape_value().map_err(parse_err)?.into_owned();
        el.attrs.push(Attribute {
            ns: ans,
            local: String::from_utf8_lossy(alocal.as_ref()).into_owned(),
            qname: String::from_utf8_lossy(key.as_ref()).into_owned(),
            value,
        });
    }
    Ok(el)
}

fn resolved(r: ResolveResult<'_>, name: &[u8]) -> Result<Option<String>, Error> {
    match r {
        ResolveResult::Bound(ns) => Ok(Some(String::from_utf8_lossy(ns.as_ref()).into_owned())),
        ResolveResult::Unbound => Ok(None),
        ResolveResult::Unknown(p) => Err(parse_err(format!(
            "unbound prefix {:?} on {:?}",
            String::from_utf8_lossy(&p),
            String::from_utf8_lossy(name)
        ))),
    }
}
