use std::collections::BTreeMap;

use dorepo_core::demo::{self, StubEndpoints};
use dorepo_core::servicedesc::{
    encode_bindings, encode_method_map, instantiate_binding, parse_bindings, parse_method_map, placeholders, Verb,
};
use dorepo_core::Error;

const HEAD: &str = r#"<?xml version="1.0"?>
<wsdl:definitions name="Wm" xmlns:wsdl="http://schemas.xmlsoap.org/wsdl/"
    xmlns:http="http://schemas.xmlsoap.org/wsdl/http/" xmlns:mime="http://schemas.xmlsoap.org/wsdl/mime/"
    xmlns:svc="urn:dorepo:service-descriptor:1" xmlns:xsd="http://www.w3.org/2001/XMLSchema">"#;

fn watermarker(location: &str) -> String {
    format!(
        r#"{HEAD}
  <svc:implements bdef="bdef:2"/>
  <wsdl:message name="WmRequest">
    <wsdl:part name="IMAGESRC" type="svc:datastream"/>
    <wsdl:part name="TEXT" type="xsd:string" svc:required="true"/>
  </wsdl:message>
  <wsdl:portType name="P">
    <wsdl:operation name="GetWatermarked"><wsdl:input message="WmRequest"/></wsdl:operation>
  </wsdl:portType>
  <wsdl:binding name="B" type="P">
    <http:binding verb="GET"/>
    <wsdl:operation name="GetWatermarked">
      <http:operation location="{location}"/>
      <wsdl:output><mime:content type="image/jpeg"/></wsdl:output>
    </wsdl:operation>
  </wsdl:binding>
  <wsdl:service name="S">
    <wsdl:port name="SP" binding="B"><http:address location="http://svc/"/></wsdl:port>
  </wsdl:service>
</wsdl:definitions>"#
    )
}

fn descriptor_error(result: Result<impl std::fmt::Debug, Error>) -> String {
    match result {
        Err(Error::Descriptor(e)) => e.message,
        other => panic!("expected a descriptor error, got {other:?}"),
    }
}

#[test]
fn demo_descriptors_round_trip() {
    let stubs = StubEndpoints::default();
    for methods in [demo::image_methods(), demo::watermark_methods()] {
        let bytes = encode_method_map(&methods, "Methods");
        assert_eq!(parse_method_map(&bytes).unwrap(), methods);
    }
    for bindings in [
        demo::model_a_bindings(&stubs),
        demo::model_b_bindings(&stubs),
        demo::watermark_bindings(&stubs),
    ] {
        let bytes = encode_bindings(&bindings, "Service");
        assert_eq!(parse_bindings(&bytes).unwrap(), bindings);
    }
}

#[test]
fn bdef_fixtures_declare_their_methods() {
    let names = |m: dorepo_core::servicedesc::MethodMap| m.methods.into_keys().collect::<Vec<_>>();
    assert_eq!(names(demo::image_methods()), ["GetHighResolution", "GetThumbnail"]);
    assert_eq!(names(demo::watermark_methods()), ["GetThumbnail", "GetWatermarked"]);
}

#[test]
fn hand_written_watermarker_parses() {
    let doc = watermarker("wm?src=(IMAGESRC)&amp;msg=(TEXT)");
    let sb = parse_bindings(doc.as_bytes()).unwrap();
    assert_eq!(sb.implements_bdef.to_string(), "bdef:2");
    let b = &sb.bindings["GetWatermarked"];
    assert_eq!(b.verb, Verb::Get);
    assert_eq!(b.url_template, "http://svc/wm?src=(IMAGESRC)&msg=(TEXT)");
    assert_eq!(b.expected_mime, "image/jpeg");
    assert_eq!(b.method.binding_keys, ["IMAGESRC"]);
    assert_eq!(b.method.user_params.len(), 1);
    assert!(b.method.user_params[0].required);
    // The keys and params are exactly the template's placeholders.
    let mut found: Vec<&str> = placeholders(&b.url_template).into_iter().map(|(_, n)| n).collect();
    found.sort();
    assert_eq!(found, ["IMAGESRC", "TEXT"]);

    let keys = BTreeMap::from([("IMAGESRC".to_owned(), "http://repo/get/demo:5/DS1".to_owned())]);
    let args = BTreeMap::from([("TEXT".to_owned(), "draft copy".to_owned())]);
    let req = instantiate_binding(b, &keys, &args).unwrap();
    assert_eq!(req.url, "http://svc/wm?src=http://repo/get/demo:5/DS1&msg=draft%20copy");
    assert!(matches!(
        instantiate_binding(b, &BTreeMap::new(), &args),
        Err(Error::MissingBindingKey(k)) if k == "IMAGESRC"
    ));
}

#[test]
fn undeclared_placeholder_is_refused() {
    let doc = watermarker("wm?src=(IMAGESRC)&amp;x=(BOGUS)");
    assert!(descriptor_error(parse_bindings(doc.as_bytes())).contains("BOGUS"));
}

#[test]
fn zero_operations_is_refused() {
    let doc = format!(r#"{HEAD}<wsdl:portType name="P"/></wsdl:definitions>"#);
    descriptor_error(parse_method_map(doc.as_bytes()));
}

#[test]
fn unsupported_constructs_are_refused() {
    let soap = watermarker("wm?src=(IMAGESRC)&amp;msg=(TEXT)").replace(
        r#"<http:binding verb="GET"/>"#,
        r#"<soap:binding xmlns:soap="http://schemas.xmlsoap.org/wsdl/soap/" style="rpc"/>"#,
    );
    descriptor_error(parse_bindings(soap.as_bytes()));
    let put = watermarker("wm?src=(IMAGESRC)&amp;msg=(TEXT)").replace(r#"verb="GET""#, r#"verb="PUT""#);
    descriptor_error(parse_bindings(put.as_bytes()));
    assert!(parse_bindings(b"<not-wsdl/>").is_err());
}

#[test]
fn binding_without_implements_is_refused() {
    let doc = watermarker("wm?src=(IMAGESRC)&amp;msg=(TEXT)").replace(r#"<svc:implements bdef="bdef:2"/>"#, "");
    descriptor_error(parse_bindings(doc.as_bytes()));
}

#[test]
fn operation_without_binding_is_refused() {
    let doc = watermarker("wm?src=(IMAGESRC)&amp;msg=(TEXT)").replace(
        r#"<wsdl:operation name="GetWatermarked"><wsdl:input message="WmRequest"/></wsdl:operation>"#,
        r#"<wsdl:operation name="GetWatermarked"><wsdl:input message="WmRequest"/></wsdl:operation>
           <wsdl:operation name="GetThumbnail"><wsdl:input message="WmRequest"/></wsdl:operation>"#,
    );
    assert!(descriptor_error(parse_bindings(doc.as_bytes())).contains("GetThumbnail"));
}
