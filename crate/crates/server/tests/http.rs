use std::sync::Arc;

use dorepo_core::demo::{self, StubEndpoints};
use dorepo_core::model::ManualClock;
use dorepo_core::Repository;
use dorepo_server::ServerHandle;
use serde_json::Value;

const TOKEN: &str = "s3cret";

struct Env {
    _dir: tempfile::TempDir,
    repo: Arc<Repository>,
    server: ServerHandle,
    agent: ureq::Agent,
}

struct Reply {
    status: u16,
    headers: Vec<(String, String)>,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|_| panic!("not JSON: {}", String::from_utf8_lossy(&self.body)))
    }

    fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }

    fn code(&self) -> String {
        self.json()["code"].as_str().unwrap_or_default().to_owned()
    }
}

/// A server over a loopback repository holding the surrogates and, unless
/// `bare`, the valid data fixtures.
fn env(bare: bool) -> Env {
    let dir = tempfile::tempdir().unwrap();
    let clock = Arc::new(ManualClock::new("2010-01-01T00:00:00".parse().unwrap()));
    let (repo, _) = demo::loopback_repository(dir.path(), clock).unwrap();
    let stubs = StubEndpoints::default();
    demo::install_surrogates(&repo, &stubs).unwrap();
    if !bare {
        for (name, doc) in demo::fixture_documents(&stubs) {
            if name.starts_with("image-") {
                repo.ingest(&doc, "loader", "").unwrap();
            }
        }
    }
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let server = ServerHandle::spawn(repo.clone(), listener, Some(TOKEN.to_owned())).unwrap();
    let agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into();
    Env {
        _dir: dir,
        repo,
        server,
        agent,
    }
}

impl Env {
    fn call(&self, method: &str, path: &str, token: Option<&str>, body: Option<&[u8]>) -> Reply {
        let url = format!("{}{path}", self.server.url());
        let request = ureq::http::Request::builder().method(method).uri(&url);
        let request = match token {
            Some(t) => request.header("Authorization", format!("Bearer {t}")),
            None => request,
        };
        let request = request.header("X-Principal", "tester");
        let mut response = match body {
            Some(b) => self.agent.run(request.body(b.to_vec()).unwrap()),
            None => self.agent.run(request.body(()).unwrap()),
        }
        .unwrap();
        let headers = response
            .headers()
            .iter()
            .map(|(k, v)| (k.as_str().to_owned(), v.to_str().unwrap_or("").to_owned()))
            .collect();
        Reply {
            status: response.status().as_u16(),
            headers,
            body: response.body_mut().read_to_vec().unwrap(),
        }
    }

    fn get(&self, path: &str) -> Reply {
        self.call("GET", path, None, None)
    }

    fn manage(&self, method: &str, path: &str, body: Option<&[u8]>) -> Reply {
        self.call(method, path, Some(TOKEN), body)
    }
}

const MANAGE_ROUTES: &[(&str, &str)] = &[
    ("POST", "/manage/ingest"),
    ("POST", "/manage/demo:1/datastreams/NEW"),
    ("PUT", "/manage/demo:1/datastreams/THUMB"),
    ("POST", "/manage/demo:1/disseminators/DISS9"),
    ("PUT", "/manage/demo:1/disseminators/DISS1"),
    ("DELETE", "/manage/demo:1"),
    ("GET", "/manage/demo:1/export"),
    ("GET", "/manage/demo:1/audit"),
];

const ACCESS_ROUTES: &[&str] = &[
    "/access/demo:1/bdefs",
    "/access/demo:1/methods/bdef:1",
    "/access/demo:1/dissem/bdef:1/GetThumbnail",
    "/get/demo:1/THUMB",
    "/wsdl",
];

#[test]
fn management_requires_the_token_and_access_does_not() {
    let env = env(false);
    let before = std::fs::read(env.repo.store().object_path(&"demo:1".parse().unwrap())).unwrap();
    for (method, path) in MANAGE_ROUTES {
        for token in [None, Some("wrong"), Some("")] {
            let reply = env.call(method, path, token, Some(b"x"));
            assert_eq!(reply.status, 401, "{method} {path} with {token:?}");
            assert_eq!(reply.code(), "UNAUTHORIZED");
        }
    }
    for path in ACCESS_ROUTES {
        assert_eq!(env.get(path).status, 200, "{path}");
    }
    let after = std::fs::read(env.repo.store().object_path(&"demo:1".parse().unwrap())).unwrap();
    assert_eq!(before, after);
}

#[test]
fn management_is_disabled_without_a_configured_token() {
    let env = env(true);
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let open = ServerHandle::spawn(env.repo.clone(), listener, None).unwrap();
    let mut resp = env
        .agent
        .post(format!("{}/manage/ingest", open.url()))
        .header("Authorization", "Bearer anything")
        .send(&b"<x/>"[..])
        .unwrap();
    assert_eq!(resp.status().as_u16(), 403);
    let body: Value = serde_json::from_slice(&resp.body_mut().read_to_vec().unwrap()).unwrap();
    assert_eq!(body["code"], "MANAGEMENT_DISABLED");
}

#[test]
fn ingest_without_token_leaves_count_unchanged() {
    let env = env(true);
    let count = env.repo.store().object_count();
    let doc = demo::model_a_object("demo:1", "a").document(false);
    assert_eq!(env.call("POST", "/manage/ingest", None, Some(&doc)).status, 401);
    assert_eq!(env.repo.store().object_count(), count);
    let reply = env.manage("POST", "/manage/ingest", Some(&doc));
    assert_eq!(reply.status, 201);
    assert_eq!(reply.json()["pid"], "demo:1");
    assert_eq!(env.repo.store().object_count(), count + 1);
    let again = env.manage("POST", "/manage/ingest", Some(&doc));
    assert_eq!((again.status, again.code().as_str()), (409, "PID_COLLISION"));
}

#[test]
fn broken_fixture_is_unprocessable_with_violations() {
    let env = env(true);
    let count = env.repo.store().object_count();
    let reply = env.manage("POST", "/manage/ingest", Some(&demo::broken_missing_bmech().document(true)));
    assert_eq!(reply.status, 422);
    let body = reply.json();
    assert_eq!(body["code"], "INTEGRITY_ERROR");
    let rules: Vec<&str> = body["violations"].as_array().unwrap().iter().map(|v| v["rule"].as_str().unwrap()).collect();
    assert_eq!(rules, ["BMECH_MISSING"]);
    let reply = env.manage("POST", "/manage/ingest", Some(b"<METS:mets xmlns:METS=\"urn:wrong\"/>"));
    assert_eq!((reply.status, reply.code().as_str()), (422, "STRUCTURAL_ERROR"));
    assert!(!reply.json()["violations"].as_array().unwrap().is_empty());
    assert_eq!(env.repo.store().object_count(), count);
}

#[test]
fn export_is_the_canonical_encoding() {
    let env = env(false);
    let reply = env.manage("GET", "/manage/demo:1/export", None);
    assert_eq!(reply.status, 200);
    assert_eq!(reply.header("content-type"), Some("text/xml"));
    assert_eq!(reply.body, env.repo.export(&"demo:1".parse().unwrap()).unwrap());
    let inline = env.manage("GET", "/manage/demo:1/export?content=inline", None);
    assert!(String::from_utf8(inline.body).unwrap().contains("binData"));
    assert_eq!(env.manage("GET", "/manage/demo:1/export?content=zip", None).status, 400);
    assert_eq!(env.manage("GET", "/manage/demo:77/export", None).code(), "OBJECT_NOT_FOUND");
}

#[test]
fn reflection_documents() {
    let env = env(false);
    let bdefs = env.get("/access/demo:3/bdefs").json();
    assert_eq!(bdefs["bdefs"], serde_json::json!(["bdef:2"]));
    assert_eq!(bdefs["asOfDate"], Value::Null);
    let methods = env.get("/access/demo:3/methods/bdef:2").json();
    assert_eq!(methods["bdefPid"], "bdef:2");
    let names: Vec<&str> = methods["methods"].as_array().unwrap().iter().map(|m| m["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["GetThumbnail", "GetWatermarked"]);
    assert_eq!(methods["methods"][1]["parameters"][0]["name"], "TEXT");
    assert_eq!(methods["methods"][1]["parameters"][0]["required"], true);
    let a = env.get("/access/demo:1/methods/bdef:1").json()["methods"].clone();
    let b = env.get("/access/demo:2/methods/bdef:1").json()["methods"].clone();
    assert_eq!(a, b);
}

#[test]
fn dissemination_streams_with_media_type() {
    let env = env(false);
    let reply = env.get("/access/demo:1/dissem/bdef:1/GetThumbnail");
    assert_eq!(reply.status, 200);
    assert_eq!(reply.header("content-type"), Some(demo::IMAGE_MIME));
    assert_eq!(reply.body, demo::model_a_content("THUMB"));

    let reply = env.get("/access/demo:3/dissem/bdef:2/GetWatermarked?TEXT=draft%20copy");
    assert_eq!(reply.body, demo::watermark("draft copy", &demo::watermark_content()));

    let then = env.get("/access/demo:4/dissem/bdef:1/GetThumbnail?asOfDate=2002-05-01T00:00:00");
    assert_eq!(then.body, demo::served_content(demo::VERSIONED_OLD_NAME));
    let now = env.get("/access/demo:4/dissem/bdef:1/GetThumbnail");
    assert_eq!(now.body, demo::served_content(demo::VERSIONED_NEW_NAME));
}

#[test]
fn error_statuses_and_codes() {
    let env = env(false);
    let cases = [
        ("/access/demo:4/dissem/bdef:1/GetThumbnail?asOfDate=2002-05-01", 400, "INVALID_TIMESTAMP"),
        ("/access/demo:4/dissem/bdef:1/GetThumbnail?asOfDate=2001-12-31T23:59:59", 404, "NO_VERSION_AT_TIME"),
        ("/access/demo:99/bdefs", 404, "OBJECT_NOT_FOUND"),
        ("/access/not-a-pid/bdefs", 400, "INVALID_PID"),
        ("/access/demo:1/methods/bdef:2", 404, "NO_SUCH_SUBSCRIPTION"),
        ("/access/demo:1/dissem/bdef:1/Nope", 404, "NO_SUCH_METHOD"),
        ("/access/demo:3/dissem/bdef:2/GetWatermarked", 400, "MISSING_REQUIRED_PARAM"),
        ("/access/demo:1/bdefs?x=1", 400, "INVALID_ARGUMENT"),
        ("/get/demo:1/NOPE", 404, "COMPONENT_NOT_FOUND"),
        ("/no/such/route", 404, "NOT_FOUND"),
    ];
    for (path, status, code) in cases {
        let reply = env.get(path);
        assert_eq!((reply.status, reply.code().as_str()), (status, code), "{path}");
    }
}

#[test]
fn component_operations_over_http() {
    let env = env(false);
    let reply = env.call(
        "POST",
        "/manage/demo:2/datastreams/NOTES?mimeType=text/plain&justification=first",
        Some(TOKEN),
        Some(b"hello"),
    );
    assert_eq!(reply.status, 201, "{}", String::from_utf8_lossy(&reply.body));
    assert_eq!(reply.json()["versionId"], "NOTES.0");
    assert_eq!(env.get("/get/demo:2/NOTES").body, b"hello");

    // Same second as the add: retryable conflict.
    let reply = env.manage("PUT", "/manage/demo:2/datastreams/NOTES", Some(b"again"));
    assert_eq!((reply.status, reply.code().as_str()), (409, "CLOCK_SKEW"));

    let reply = env.manage("POST", "/manage/demo:2/datastreams/NOTES?mimeType=text/plain", Some(b"x"));
    assert_eq!((reply.status, reply.code().as_str()), (409, "DUPLICATE_COMPONENT"));
    let reply = env.manage("POST", "/manage/demo:2/datastreams/LINK?mimeType=text/plain&location=relative/path", None);
    assert_eq!((reply.status, reply.code().as_str()), (422, "INTEGRITY_ERROR"));

    let spec = br#"{"bdefPid":"bdef:1","bmechPid":"bmech:3","bindingMap":{"IMAGESRC":"WAVELET"}}"#;
    let reply = env.manage("POST", "/manage/demo:2/disseminators/DISS2", Some(spec));
    assert_eq!(reply.status, 422);
    assert_eq!(reply.json()["violations"][0]["rule"], "IMPLEMENTS_MISMATCH");
    let spec = br#"{"bdefPid":"bdef:2","bmechPid":"bmech:3","bindingMap":{"IMAGESRC":"WAVELET"}}"#;
    let reply = env.manage("POST", "/manage/demo:2/disseminators/DISS2", Some(spec));
    assert_eq!(reply.status, 201);
    assert_eq!(env.manage("POST", "/manage/demo:2/disseminators/DISS3", Some(b"{}")).code(), "INVALID_ARGUMENT");

    let audit = env.manage("GET", "/manage/demo:2/audit", None).json();
    let trail = audit["auditTrail"].as_array().unwrap();
    let last = trail.last().unwrap();
    assert_eq!(last["action"], "ADD_DISSEMINATOR");
    assert_eq!(last["responsible"], "tester");
    assert_eq!(trail[trail.len() - 2]["justification"], "first");

    let reply = env.manage("DELETE", "/manage/bmech:3", None);
    assert_eq!((reply.status, reply.code().as_str()), (409, "IN_USE"));
    assert!(reply.json()["violations"].as_array().unwrap().iter().any(|p| p == "demo:2"));
    assert_eq!(env.manage("DELETE", "/manage/demo:2", None).status, 200);
    assert_eq!(env.get("/access/demo:2/bdefs").status, 404);
}

#[test]
fn no_response_reveals_mechanism_addresses() {
    let env = env(false);
    let stubs = StubEndpoints::default();
    let paths = [
        "/access/demo:1/bdefs",
        "/access/demo:1/methods/bdef:1",
        "/access/demo:1/dissem/bdef:1/GetThumbnail",
        "/access/demo:1/dissem/bdef:1/GetHighResolution",
        "/access/demo:2/dissem/bdef:1/GetThumbnail",
        "/access/demo:3/dissem/bdef:2/GetWatermarked?TEXT=x",
        "/access/demo:3/dissem/bdef:2/GetWatermarked",
        "/access/demo:4/dissem/bdef:1/GetThumbnail?asOfDate=2002-05-01T00:00:00",
        "/access/demo:4/dissem/bdef:1/GetThumbnail?asOfDate=2001-01-01T00:00:00",
    ];
    for path in paths {
        let reply = env.get(path);
        let mut text = String::from_utf8_lossy(&reply.body).into_owned();
        for (k, v) in &reply.headers {
            text.push_str(&format!("\n{k}: {v}"));
        }
        for addr in [&stubs.echo, &stubs.resizer, &stubs.watermarker, &stubs.content] {
            assert!(!text.contains(addr.as_str()), "{path} leaks {addr}");
        }
    }
}

#[test]
fn wsdl_is_served() {
    let env = env(true);
    let reply = env.get("/wsdl");
    assert_eq!(reply.header("content-type"), Some("text/xml"));
    let text = String::from_utf8(reply.body).unwrap();
    assert!(text.contains("GetDissemination") && text.contains("wsdl:definitions"));
}
