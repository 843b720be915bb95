//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! each, and exits non-zero if any failed.

mod common;
#[path = "../../core/tests/common/strategy.rs"]
mod strategy;

use std::collections::{BTreeMap, BTreeSet};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use dorepo_core::demo::{self, StubEndpoints};
use dorepo_core::metsio::{decode_object, encode_object, validate_structure};
use dorepo_core::model::{ContentLocation, ManualClock};
use dorepo_core::store::failpoints::{self, BEFORE_RENAME};
use dorepo_core::{
    DatastreamChange, DigitalObject, DisseminatorSpec, NewContent, Pid, Repository, RepositoryConfig, Store,
    StoreConfig, Timestamp,
};
use dorepo_harness::{run_load, seed_repository, LoadProfile, LoadReport, ModelMix, StubServers};
use dorepo_server::ServerHandle;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use serde_json::Value;
use sha2::{Digest, Sha256};

const CODEC_CASES: u32 = 512;
const CODEC_TIME_LIMIT: Duration = Duration::from_secs(60);
const MUTATION_OBJECTS: u64 = 5;
const MIN_MUTATIONS: usize = 20;
const LOAD_USERS: usize = 20;
const LOAD_THINK: Duration = Duration::from_millis(300);
const LOAD_REQUESTS: usize = 600;
const LOAD_WARMUP_REQUESTS: usize = 60;
const LOAD_SMALL: u64 = 1_000;
const LOAD_LARGE: u64 = 10_000;
const LOAD_MEAN_LIMIT_MS: f64 = 500.0;
const LOAD_GROWTH_LIMIT: f64 = 3.0;
const LOAD_TIME_LIMIT: Duration = Duration::from_secs(600);
const CRASH_TRIALS: usize = 100;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ts(s: &str) -> Timestamp {
    s.parse().unwrap()
}

fn sha256(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

// ---------------------------------------------------------------------------
// HTTP plumbing shared by the end-to-end criteria.

/// One response from the access interface, kept for the opacity scan.
struct Captured {
    url: String,
    headers: String,
    body: Vec<u8>,
}

#[derive(Default)]
struct Ledger {
    access_responses: Vec<Captured>,
    /// `http://host:port` and `host:port` of every stub service started.
    stub_markers: BTreeSet<String>,
}

fn ledger() -> &'static Mutex<Ledger> {
    static LEDGER: std::sync::OnceLock<Mutex<Ledger>> = std::sync::OnceLock::new();
    LEDGER.get_or_init(Default::default)
}

struct Bench {
    stubs: Option<StubServers>,
    endpoints: StubEndpoints,
    repo: Arc<Repository>,
    server: ServerHandle,
}

impl Bench {
    fn start(root: &Path) -> Self {
        let stubs = StubServers::spawn("127.0.0.1", [0; 4]).expect("stub services bind");
        let endpoints = stubs.endpoints().clone();
        {
            let mut l = ledger().lock().unwrap();
            for url in [&endpoints.watermarker, &endpoints.resizer, &endpoints.echo, &endpoints.content] {
                l.stub_markers.insert(url.clone());
                l.stub_markers.insert(url.trim_start_matches("http://").to_owned());
            }
        }
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let repo = Arc::new(Repository::open(&RepositoryConfig::new(root, base)).unwrap());
        let server = ServerHandle::spawn(Arc::clone(&repo), listener, Some(common::TOKEN.to_owned())).unwrap();
        Self {
            stubs: Some(stubs),
            endpoints,
            repo,
            server,
        }
    }

    /// GET against the server; access-interface responses are captured.
    fn get(&self, path: &str) -> (u16, Vec<u8>) {
        let url = format!("{}{path}", self.server.url());
        let (status, headers, body) = common::get(&url);
        if path.starts_with("/access/") || path.starts_with("/get/") {
            ledger().lock().unwrap().access_responses.push(Captured {
                url,
                headers,
                body: body.clone(),
            });
        }
        (status, body)
    }

    fn ingest(&self, doc: &[u8]) -> (u16, Value) {
        let mut resp = common::agent()
            .post(format!("{}/manage/ingest", self.server.url()))
            .header("Authorization", format!("Bearer {}", common::TOKEN))
            .header("Content-Type", "text/xml")
            .send(doc)
            .unwrap();
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_vec().unwrap();
        (status, serde_json::from_slice(&body).unwrap_or(Value::Null))
    }

    fn install_surrogates(&self) -> Result<(), String> {
        for b in demo::surrogates(&self.endpoints) {
            let (status, body) = self.ingest(&b.document(false));
            ensure(status == 201, || format!("surrogate ingest answered {status}: {body}"))?;
        }
        Ok(())
    }
}

fn error_code(body: &[u8]) -> String {
    serde_json::from_slice::<Value>(body)
        .ok()
        .and_then(|v| v["code"].as_str().map(str::to_owned))
        .unwrap_or_else(|| String::from_utf8_lossy(body).into_owned())
}

// ---------------------------------------------------------------------------

fn codec_roundtrip() -> Outcome {
    let started = Instant::now();
    let mut runner = TestRunner::new(Config {
        cases: CODEC_CASES,
        failure_persistence: None,
        ..Config::default()
    });
    let cases = std::sync::atomic::AtomicU32::new(0);
    let result = runner.run(&strategy::digital_object(), |obj: DigitalObject| {
        cases.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let fail = |m: String| TestCaseError::fail(m);
        if !obj.invariant_violations().is_empty() {
            return Err(fail(format!("generator produced invalid object: {:?}", obj.invariant_violations())));
        }
        let bytes = encode_object(&obj);
        let problems = validate_structure(&bytes).map_err(|e| fail(e.to_string()))?;
        if !problems.is_empty() {
            return Err(fail(format!("structural violations {problems:?}")));
        }
        let back = decode_object(&bytes).map_err(|e| fail(e.to_string()))?;
        if back != obj {
            return Err(fail(format!("decode differs for {}", obj.pid)));
        }
        if encode_object(&back) != bytes {
            return Err(fail(format!("re-encode of {} is not byte-identical", obj.pid)));
        }
        Ok(())
    });
    let elapsed = started.elapsed();
    let cases = cases.into_inner();
    result.map_err(|e| e.to_string())?;
    ensure(cases >= 500, || format!("only {cases} cases ran"))?;
    ensure(elapsed < CODEC_TIME_LIMIT, || format!("took {elapsed:.1?}"))?;
    Ok(format!("{cases} generated objects, 0 failures, {elapsed:.1?} (limit {CODEC_TIME_LIMIT:?})"))
}

fn time_travel() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bench = Bench::start(dir.path());
    bench.install_surrogates()?;
    let (status, body) = bench.ingest(&demo::versioned_object("demo:4", &bench.endpoints).document(false));
    ensure(status == 201, || format!("ingest answered {status}: {body}"))?;

    let x = demo::served_content(demo::VERSIONED_NEW_NAME);
    let y = demo::served_content(demo::VERSIONED_OLD_NAME);
    ensure(x != y, || "old and new content coincide".into())?;
    let path = "/access/demo:4/dissem/bdef:1/GetThumbnail";

    let (status, body) = bench.get(&format!("{path}?asOfDate=2002-05-01T00:00:00"));
    ensure(status == 200 && body == y, || format!("asOfDate 2002-05-01: {status}, {} bytes, not DS1.0 content", body.len()))?;
    let (status, body) = bench.get(path);
    ensure(status == 200 && body == x, || format!("no asOfDate: {status}, {} bytes, not DS1.1 content", body.len()))?;
    let (status, body) = bench.get(&format!("{path}?asOfDate=2001-12-31T23:59:59"));
    let code = error_code(&body);
    ensure(code == "NO_VERSION_AT_TIME", || format!("asOfDate 2001-12-31: {status} {code}"))?;

    let (_, direct) = bench.get("/get/demo:4/DS1?asOfDate=2002-05-01T00:00:00");
    ensure(direct == y, || "direct datastream read at 2002-05-01 differs".into())?;
    let log = bench.stubs.as_ref().unwrap().requests();
    ensure(log.iter().any(|l| l.contains("asOfDate=2002-05-01T00:00:00")), || {
        format!("stub never saw asOfDate: {log:?}")
    })?;

    // Reflection too goes through the capture for the opacity scan.
    bench.get("/access/demo:4/bdefs");
    bench.get("/access/demo:4/methods/bdef:1");
    Ok(format!("2002-05-01 -> DS1.0 ({} bytes), now -> DS1.1 ({} bytes), 2001-12-31 -> {code}", y.len(), x.len()))
}

fn functional_equivalency() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bench = Bench::start(dir.path());
    let report = seed_repository(&bench.repo, &bench.endpoints, 2, &"a:1,b:1".parse().unwrap(), 1)
        .map_err(|e| e.to_string())?;
    let (a, b) = (&report.objects[0].0, &report.objects[1].0);

    let profile = |p: &Pid| -> Result<Value, String> {
        let (status, body) = bench.get(&format!("/access/{p}/methods/bdef:1"));
        ensure(status == 200, || format!("get_methods {p}: {status}"))?;
        let mut v: Value = serde_json::from_slice(&body).map_err(|e| e.to_string())?;
        v.as_object_mut().unwrap().remove("pid");
        Ok(v)
    };
    let (pa, pb) = (profile(a)?, profile(b)?);
    ensure(pa == pb, || format!("behavior profiles differ:\n{pa}\n{pb}"))?;
    let names: Vec<&str> = pa["methods"].as_array().unwrap().iter().filter_map(|m| m["name"].as_str()).collect();

    let (sa, ta) = bench.get(&format!("/access/{a}/dissem/bdef:1/GetThumbnail"));
    let (sb, tb) = bench.get(&format!("/access/{b}/dissem/bdef:1/GetThumbnail"));
    ensure(sa == 200 && ta == demo::model_a_content("THUMB"), || format!("model A thumbnail: {sa}"))?;
    ensure(sb == 200 && tb == demo::model_b_content()[..demo::THUMBNAIL_BYTES], || format!("model B thumbnail: {sb}"))?;
    let log = bench.stubs.as_ref().unwrap().requests();
    let via = |stub: &str, p: &Pid| log.iter().any(|l| l.starts_with(stub) && l.contains(&format!("/get/{p}/")));
    ensure(via("echo", a) && via("resizer", b), || format!("mechanisms not both exercised: {log:?}"))?;
    Ok(format!("{a} (model A) and {b} (model B) share profile {names:?}; thumbnails via echo and resizer"))
}

fn integrity_gate() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bench = Bench::start(dir.path());
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    for name in [
        "bdef-image",
        "bdef-watermark",
        "bmech-image-four-resolutions",
        "bmech-image-wavelet",
        "bmech-watermark",
    ] {
        let doc = std::fs::read(fixtures.join(format!("{name}.mets.xml"))).map_err(|e| format!("{name}: {e}"))?;
        let (status, body) = bench.ingest(&doc);
        ensure(status == 201, || format!("{name}: {status} {body}"))?;
    }
    let mut seen = Vec::new();
    for (name, expected) in [
        ("broken-bmech-missing", "BMECH_MISSING"),
        ("broken-implements-mismatch", "IMPLEMENTS_MISMATCH"),
        ("broken-unbound-key", "UNBOUND_KEY"),
    ] {
        let doc = std::fs::read(fixtures.join(format!("{name}.mets.xml"))).map_err(|e| format!("{name}: {e}"))?;
        let before = (bench.repo.store().object_count(), bench.repo.store().registry().last_issued("demo").unwrap());
        let (status, body) = bench.ingest(&doc);
        let rules: BTreeSet<&str> = body["violations"]
            .as_array()
            .map(|v| v.iter().filter_map(|x| x["rule"].as_str()).collect())
            .unwrap_or_default();
        ensure(status == 422 && body["code"] == "INTEGRITY_ERROR", || format!("{name}: {status} {body}"))?;
        ensure(rules == BTreeSet::from([expected]), || format!("{name}: rules {rules:?}, expected {expected}"))?;
        let after = (bench.repo.store().object_count(), bench.repo.store().registry().last_issued("demo").unwrap());
        ensure(before == after, || format!("{name}: count/counter moved {before:?} -> {after:?}"))?;
        seen.push(expected);
    }
    Ok(format!("rejected with {seen:?}; object count stayed {}", bench.repo.store().object_count()))
}

/// Hash of every component version of every object: metadata plus bytes.
fn version_hashes(repo: &Repository) -> BTreeMap<(String, String), String> {
    let mut out = BTreeMap::new();
    for entry in repo.store().list_objects(None, None) {
        let obj = repo.get_object(&entry.pid).unwrap();
        for ds in obj.datastreams.values() {
            for v in &ds.versions {
                let mut h = Sha256::new();
                h.update(format!("{v:?}"));
                if let ContentLocation::Internal(key) = &v.location {
                    h.update(repo.store().get_content(key).unwrap());
                }
                out.insert((obj.pid.to_string(), v.version_id.clone()), format!("{:x}", h.finalize()));
            }
        }
        for d in obj.disseminators.values() {
            for v in &d.versions {
                out.insert((obj.pid.to_string(), v.version_id.clone()), sha256(format!("{v:?}").as_bytes()));
            }
        }
    }
    out
}

fn audit_sweep() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let clock = Arc::new(ManualClock::new(ts("2010-01-01T00:00:00")));
    let (repo, _fetcher) = demo::loopback_repository(dir.path(), clock.clone()).map_err(|e| e.to_string())?;
    let report = seed_repository(&repo, &StubEndpoints::default(), MUTATION_OBJECTS, &ModelMix::default(), 1)
        .map_err(|e| e.to_string())?;

    let who = "curator";
    let mut mutations = 0;
    let mut ledger = version_hashes(&repo);
    let mut trails: BTreeMap<Pid, Vec<_>> = BTreeMap::new();
    for (p, _) in &report.objects {
        trails.insert(p.clone(), repo.audit_trail(p).unwrap());
    }
    for round in 0..5 {
        for (p, model) in &report.objects {
            clock.advance(60);
            let primary = match model {
                dorepo_harness::ContentModel::A => "THUMB",
                dorepo_harness::ContentModel::B => demo::MODEL_B_DATASTREAM,
                dorepo_harness::ContentModel::W => "IMAGE",
            };
            let bytes = format!("round {round} of {p}").into_bytes();
            let result = match round {
                0 => repo.add_datastream(p, "NOTES", "text/plain", NewContent::Internal(bytes), who, "notes"),
                1 => repo.modify_datastream(
                    p,
                    "NOTES",
                    DatastreamChange {
                        mime_type: Some("text/markdown".into()),
                        content: Some(NewContent::Internal(bytes)),
                    },
                    who,
                    "revise notes",
                ),
                2 => repo.modify_datastream(
                    p,
                    primary,
                    DatastreamChange {
                        mime_type: None,
                        content: Some(NewContent::Internal(demo::content_bytes(&format!("{p}/rescan"), 256))),
                    },
                    who,
                    "rescan",
                ),
                3 => {
                    let obj = repo.get_object(p).unwrap();
                    let v = &obj.disseminator("DISS1").unwrap().versions[0];
                    let spec = DisseminatorSpec {
                        bdef_pid: v.bdef_pid.clone(),
                        bmech_pid: v.bmech_pid.clone(),
                        binding_map: v.binding_map.iter().map(|(k, d)| (k.clone(), d.as_str().to_owned())).collect(),
                    };
                    repo.modify_disseminator(p, "DISS1", &spec, who, "rebind")
                }
                _ => repo.add_datastream(
                    p,
                    "SOURCE",
                    "text/html",
                    NewContent::External(format!("http://example.org/catalog/{}", p.serial())),
                    who,
                    "link catalog",
                ),
            };
            result.map_err(|e| format!("round {round} on {p}: {e}"))?;
            mutations += 1;

            let now = version_hashes(&repo);
            for (k, h) in &ledger {
                ensure(now.get(k) == Some(h), || format!("version {k:?} changed or vanished after mutation {mutations}"))?;
            }
            ensure(now.len() == ledger.len() + 1, || format!("mutation {mutations} added {} versions", now.len() - ledger.len()))?;
            ledger = now;
            let trail = repo.audit_trail(p).unwrap();
            let before = &trails[p];
            ensure(trail.len() == before.len() + 1 && trail[..before.len()] == before[..], || {
                format!("audit trail of {p} was not appended to")
            })?;
            trails.insert(p.clone(), trail);
        }
    }
    ensure(mutations >= MIN_MUTATIONS, || format!("only {mutations} mutations"))?;

    let mut versions = 0;
    for entry in repo.store().list_objects(None, None) {
        let obj = repo.get_object(&entry.pid).unwrap();
        let ids: BTreeMap<&str, &str> =
            obj.audit_trail.iter().map(|r| (r.id.as_str(), r.component_id.as_str())).collect();
        let components = obj
            .datastreams
            .values()
            .flat_map(|d| d.versions.iter().map(move |v| (d.id.as_str(), &v.audit_id)))
            .chain(obj.disseminators.values().flat_map(|d| d.versions.iter().map(move |v| (d.id.as_str(), &v.audit_id))));
        for (component, audit_id) in components {
            versions += 1;
            ensure(ids.get(audit_id.as_str()) == Some(&component), || {
                format!("{}: {component} names {audit_id}, which does not resolve to it", obj.pid)
            })?;
        }
    }
    let violations = repo.integrity_sweep().map_err(|e| e.to_string())?;
    ensure(violations.is_empty(), || format!("integrity sweep: {violations:?}"))?;
    Ok(format!(
        "{mutations} mutations over {MUTATION_OBJECTS} objects; {versions} versions resolve their audit ids; hash ledger of {} versions intact; 0 violations",
        ledger.len()
    ))
}

fn opacity() -> Outcome {
    // Error paths carry the most detail, so include an upstream failure.
    let dir = tempfile::tempdir().unwrap();
    let mut bench = Bench::start(dir.path());
    bench.install_surrogates()?;
    let (status, body) = bench.ingest(&demo::watermark_object("demo:3", "Watermark").document(false));
    ensure(status == 201, || format!("ingest: {status} {body}"))?;
    let (status, _) = bench.get("/access/demo:3/dissem/bdef:2/GetWatermarked?TEXT=opaque");
    ensure(status == 200, || format!("watermark: {status}"))?;
    bench.get("/access/demo:3/dissem/bdef:2/GetWatermarked");
    bench.get("/access/demo:3/dissem/bdef:2/NoSuchMethod");
    drop(bench.stubs.take());
    let (status, _) = bench.get("/access/demo:3/dissem/bdef:2/GetThumbnail");
    ensure(status == 502, || format!("with stubs down: {status}"))?;

    let l = ledger().lock().unwrap();
    ensure(l.access_responses.len() >= 10, || format!("only {} responses captured", l.access_responses.len()))?;
    for c in &l.access_responses {
        let body = String::from_utf8_lossy(&c.body);
        for marker in &l.stub_markers {
            ensure(!c.headers.contains(marker.as_str()), || format!("{}: header exposes {marker}", c.url))?;
            ensure(!body.contains(marker.as_str()), || format!("{}: body exposes {marker}", c.url))?;
        }
    }
    Ok(format!(
        "{} access responses scanned for {} stub URL markers; none found",
        l.access_responses.len(),
        l.stub_markers.len()
    ))
}

fn load_at(n: u64) -> Result<LoadReport, String> {
    let dir = tempfile::tempdir().unwrap();
    let bench = Bench::start(dir.path());
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get());
    let started = Instant::now();
    let report = seed_repository(&bench.repo, &bench.endpoints, n, &ModelMix::default(), workers)
        .map_err(|e| e.to_string())?;
    eprintln!("  seeded {n} objects in {:.1?}", started.elapsed());
    let warmup = LoadProfile {
        users: LOAD_USERS,
        think_time: Duration::ZERO,
        requests: LOAD_WARMUP_REQUESTS,
        ..LoadProfile::default()
    };
    run_load(&bench.server.url(), &report.objects, &warmup).map_err(|e| e.to_string())?;
    let profile = LoadProfile {
        users: LOAD_USERS,
        think_time: LOAD_THINK,
        requests: LOAD_REQUESTS,
        ..LoadProfile::default()
    };
    let (load, _) = run_load(&bench.server.url(), &report.objects, &profile).map_err(|e| e.to_string())?;
    eprintln!("  {n} objects: {load}");
    ensure(load.requests == LOAD_REQUESTS && load.errors == 0, || format!("{n} objects: {load}"))?;
    Ok(load)
}

fn performance() -> Outcome {
    let started = Instant::now();
    let small = load_at(LOAD_SMALL)?;
    let large = load_at(LOAD_LARGE)?;
    let elapsed = started.elapsed();
    let ratio = large.mean_ms / small.mean_ms.max(f64::EPSILON);
    let detail = format!(
        "mean {:.1} ms at {LOAD_SMALL}, {:.1} ms at {LOAD_LARGE} (limit {LOAD_MEAN_LIMIT_MS} ms); ratio {ratio:.2} (limit {LOAD_GROWTH_LIMIT}); {elapsed:.0?}",
        small.mean_ms, large.mean_ms
    );
    ensure(large.mean_ms < LOAD_MEAN_LIMIT_MS, || detail.clone())?;
    ensure(ratio < LOAD_GROWTH_LIMIT, || detail.clone())?;
    ensure(elapsed < LOAD_TIME_LIMIT, || detail.clone())?;
    Ok(detail)
}

fn crash_consistency() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let store = Store::open(&StoreConfig::new(&root)).map_err(|e| e.to_string())?;
    let mut committed = demo::model_a_object("demo:1", "crash v0").build();
    store.put_object(&committed).map_err(|e| e.to_string())?;

    let mut survived = 0;
    for trial in 0..CRASH_TRIALS {
        let mut next = committed.clone();
        next.label = format!("crash v{}", trial + 1);
        next.modified = next.modified.plus_seconds(1);

        failpoints::arm(BEFORE_RENAME, &root, 1);
        let result = store.put_object(&next);
        failpoints::disarm(BEFORE_RENAME, &root);
        ensure(matches!(result, Err(dorepo_core::Error::Storage { .. })), || {
            format!("trial {trial}: put_object returned {result:?}")
        })?;

        let live = store.get_object(&committed.pid).map_err(|e| format!("trial {trial}: {e}"))?;
        ensure(*live == committed, || format!("trial {trial}: live read differs from prior"))?;
        let entry = store.index_snapshot().get(&committed.pid).cloned();
        ensure(entry.as_ref().is_some_and(|e| e.label == committed.label && e.modified == committed.modified), || {
            format!("trial {trial}: index entry {entry:?}")
        })?;
        let reopened = Store::open(&StoreConfig::new(&root)).map_err(|e| format!("trial {trial}: reopen: {e}"))?;
        let from_disk = reopened.get_object(&committed.pid).map_err(|e| format!("trial {trial}: {e}"))?;
        ensure(*from_disk == committed, || format!("trial {trial}: on-disk object differs from prior"))?;
        ensure(reopened.index_snapshot() == store.index_snapshot(), || {
            format!("trial {trial}: rebuilt index differs from live index")
        })?;
        survived += 1;

        // Commit every other version so later trials start from fresh state.
        if trial % 2 == 1 {
            store.put_object(&next).map_err(|e| format!("trial {trial}: commit: {e}"))?;
            committed = next;
        }
    }
    ensure(survived == CRASH_TRIALS, || format!("{survived}/{CRASH_TRIALS}"))?;
    Ok(format!("{survived}/{CRASH_TRIALS} injected failures before rename left the prior object readable and the index consistent"))
}

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("codec round-trip", codec_roundtrip),
        ("time travel", time_travel),
        ("functional equivalency", functional_equivalency),
        ("referential-integrity gate", integrity_gate),
        ("audit and append-only sweep", audit_sweep),
        ("mediation opacity", opacity),
        ("performance shape", performance),
        ("crash consistency", crash_consistency),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        if filter.as_ref().is_some_and(|f| !name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| (*s).to_owned()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} [{:.1?}]", i + 1, started.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why} [{:.1?}]", i + 1, started.elapsed());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
