//! WSDL self-description of both interfaces over the HTTP binding.

use dorepo_core::xml::Element;

const WSDL: &str = "http://schemas.xmlsoap.org/wsdl/";
const HTTP: &str = "http://schemas.xmlsoap.org/wsdl/http/";
const MIME: &str = "http://schemas.xmlsoap.org/wsdl/mime/";

struct Operation {
    name: &'static str,
    verb: &'static str,
    location: &'static str,
    parts: &'static [&'static str],
    output: &'static str,
}

const ACCESS: &[Operation] = &[
    Operation {
        name: "GetBehaviorDefinitions",
        verb: "GET",
        location: "access/(pid)/bdefs",
        parts: &["pid", "asOfDate"],
        output: "application/json",
    },
    Operation {
        name: "GetBehaviorMethods",
        verb: "GET",
        location: "access/(pid)/methods/(bdefPid)",
        parts: &["pid", "bdefPid", "asOfDate"],
        output: "application/json",
    },
    Operation {
        name: "GetDissemination",
        verb: "GET",
        location: "access/(pid)/dissem/(bdefPid)/(method)",
        parts: &["pid", "bdefPid", "method", "asOfDate"],
        output: "*/*",
    },
    Operation {
        name: "GetDatastream",
        verb: "GET",
        location: "get/(pid)/(dsid)",
        parts: &["pid", "dsid", "asOfDate"],
        output: "*/*",
    },
];

const MANAGEMENT: &[Operation] = &[
    Operation {
        name: "Ingest",
        verb: "POST",
        location: "manage/ingest",
        parts: &["document", "justification"],
        output: "application/json",
    },
    Operation {
        name: "AddDatastream",
        verb: "POST",
        location: "manage/(pid)/datastreams/(dsid)",
        parts: &["pid", "dsid", "mimeType", "location", "content", "justification"],
        output: "application/json",
    },
    Operation {
        name: "ModifyDatastream",
        verb: "PUT",
        location: "manage/(pid)/datastreams/(dsid)",
        parts: &["pid", "dsid", "mimeType", "location", "content", "justification"],
        output: "application/json",
    },
    Operation {
        name: "AddDisseminator",
        verb: "POST",
        location: "manage/(pid)/disseminators/(dissid)",
        parts: &["pid", "dissid", "disseminator", "justification"],
        output: "application/json",
    },
    Operation {
        name: "ModifyDisseminator",
        verb: "PUT",
        location: "manage/(pid)/disseminators/(dissid)",
        parts: &["pid", "dissid", "disseminator", "justification"],
        output: "application/json",
    },
    Operation {
        name: "PurgeObject",
        verb: "DELETE",
        location: "manage/(pid)",
        parts: &["pid", "justification"],
        output: "application/json",
    },
    Operation {
        name: "Export",
        verb: "GET",
        location: "manage/(pid)/export",
        parts: &["pid", "content"],
        output: "text/xml",
    },
    Operation {
        name: "GetAuditTrail",
        verb: "GET",
        location: "manage/(pid)/audit",
        parts: &["pid"],
        output: "application/json",
    },
];

fn wsdl(local: &str) -> Element {
    Element::new(WSDL, "wsdl", local)
}

fn interface(mut root: Element, name: &str, ops: &[Operation], base: &str) -> Element {
    for op in ops {
        let mut msg = wsdl("message").attr("name", format!("{}Request", op.name));
        for part in op.parts {
            msg = msg.child(wsdl("part").attr("name", *part).attr("type", "xsd:string"));
        }
        root = root.child(msg);
    }
    let mut port_type = wsdl("portType").attr("name", format!("{name}PortType"));
    for op in ops {
        port_type = port_type.child(
            wsdl("operation")
                .attr("name", op.name)
                .child(wsdl("input").attr("message", format!("{}Request", op.name))),
        );
    }
    let mut binding = wsdl("binding")
        .attr("name", format!("{name}HttpBinding"))
        .attr("type", format!("{name}PortType"))
        .child(Element::new(HTTP, "http", "binding").attr("verb", "GET"));
    for op in ops {
        binding = binding.child(
            wsdl("operation")
                .attr("name", op.name)
                .child(Element::new(HTTP, "http", "operation").attr("location", op.location).attr("verb", op.verb))
                .child(wsdl("output").child(Element::new(MIME, "mime", "content").attr("type", op.output))),
        );
    }
    let service = wsdl("service").attr("name", name).child(
        wsdl("port")
            .attr("name", format!("{name}Port"))
            .attr("binding", format!("{name}HttpBinding"))
            .child(Element::new(HTTP, "http", "address").attr("location", format!("{base}/"))),
    );
    root.child(port_type).child(binding).child(service)
}

/// The document served at `GET /wsdl`.
pub fn service_description(base_url: &str) -> Vec<u8> {
    let root = wsdl("definitions")
        .attr("name", "DigitalObjectRepository")
        .attr("xmlns:wsdl", WSDL)
        .attr("xmlns:http", HTTP)
        .attr("xmlns:mime", MIME)
        .attr("xmlns:xsd", "http://www.w3.org/2001/XMLSchema");
    let root = interface(root, "Access", ACCESS, base_url);
    interface(root, "Management", MANAGEMENT, base_url).to_document()
}
