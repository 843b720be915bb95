use std::path::{Path, PathBuf};

use dorepo_core::demo::{self, StubEndpoints};
use dorepo_server::cli::{run, Io, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
use serde_json::Value;

struct Output {
    code: i32,
    out: String,
    err: String,
}

fn dorepo(root: &Path, args: &[&str]) -> Output {
    let mut argv: Vec<String> = vec!["dorepo".into(), "--data-root".into(), root.display().to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv.into_iter().map(Into::into), &mut Io { out: &mut out, err: &mut err });
    Output {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

/// Writes every fixture document into `dir` and returns the paths in ingest order.
fn fixtures(dir: &Path) -> Vec<PathBuf> {
    demo::fixture_documents(&StubEndpoints::default())
        .into_iter()
        .map(|(name, doc)| {
            let path = dir.join(name);
            std::fs::write(&path, doc).unwrap();
            path
        })
        .collect()
}

fn path_args(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

#[test]
fn ingest_export_list_audit_purge() {
    let repo = tempfile::tempdir().unwrap();
    let files = tempfile::tempdir().unwrap();
    let all = fixtures(files.path());
    let valid: Vec<PathBuf> = all.iter().filter(|p| !p.to_string_lossy().contains("broken-")).cloned().collect();

    let args = path_args(&valid[..1]);
    let out = dorepo(repo.path(), &["ingest", &args[0]]);
    assert_eq!(out.code, EXIT_OK, "{}", out.err);
    assert!(out.out.starts_with("bdef:1\t"), "{}", out.out);

    let rest = path_args(&valid[1..]);
    let mut argv = vec!["ingest"];
    argv.extend(rest.iter().map(String::as_str));
    let out = dorepo(repo.path(), &argv);
    assert_eq!(out.code, EXIT_OK, "{}", out.err);
    assert_eq!(out.out.lines().count(), valid.len() - 1);

    let out = dorepo(repo.path(), &["list", "--kind", "bdef"]);
    let pids: Vec<&str> = out.out.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(pids, ["bdef:1", "bdef:2"]);
    let out = dorepo(repo.path(), &["--format", "json", "list", "--label", "image"]);
    let rows: Value = serde_json::from_str(&out.out).unwrap();
    assert!(rows.as_array().unwrap().iter().all(|r| r["label"].as_str().unwrap().contains("image")));
    assert!(!rows.as_array().unwrap().is_empty());

    let target = files.path().join("out.mets.xml");
    let out = dorepo(repo.path(), &["export", "demo:1", "-o", target.to_str().unwrap()]);
    assert_eq!(out.code, EXIT_OK);
    let stdout_export = dorepo(repo.path(), &["export", "demo:1"]);
    assert_eq!(std::fs::read_to_string(&target).unwrap(), stdout_export.out);

    let out = dorepo(repo.path(), &["audit", "demo:1"]);
    assert!(out.out.lines().last().unwrap().contains("INGEST"));

    let out = dorepo(repo.path(), &["purge", "bdef:1"]);
    assert_eq!(out.code, EXIT_FAILURE);
    assert!(out.err.contains("still referenced"), "{}", out.err);
    let out = dorepo(repo.path(), &["--justification", "cleanup", "purge", "demo:1"]);
    assert_eq!((out.code, out.out.trim()), (EXIT_OK, "purged demo:1"));
    assert_eq!(dorepo(repo.path(), &["export", "demo:1"]).code, EXIT_FAILURE);

    let out = dorepo(repo.path(), &["fsck"]);
    // The purged object's blobs are now unreferenced.
    assert!(out.out.contains("orphan blob"), "{}", out.out);
}

#[test]
fn broken_fixtures_fail_with_violation_codes() {
    let repo = tempfile::tempdir().unwrap();
    let files = tempfile::tempdir().unwrap();
    let all = fixtures(files.path());
    let surrogates = path_args(&all[..5]);
    let mut argv = vec!["ingest"];
    argv.extend(surrogates.iter().map(String::as_str));
    assert_eq!(dorepo(repo.path(), &argv).code, EXIT_OK);

    let broken = files.path().join("broken-bmech-missing.mets.xml");
    let out = dorepo(repo.path(), &["ingest", broken.to_str().unwrap()]);
    assert_eq!(out.code, EXIT_FAILURE);
    assert!(out.err.contains("BMECH_MISSING"), "{}", out.err);

    let out = dorepo(repo.path(), &["--format", "json", "ingest", broken.to_str().unwrap()]);
    let body: Value = serde_json::from_str(&out.out).unwrap();
    assert_eq!(body[0]["error"]["violations"][0]["rule"], "BMECH_MISSING");
}

#[test]
fn exit_codes() {
    let repo = tempfile::tempdir().unwrap();
    let out = dorepo(repo.path(), &["export", "unknown:1"]);
    assert_eq!(out.code, EXIT_FAILURE);
    assert!(out.err.contains("not found"), "{}", out.err);
    let out = dorepo(repo.path(), &["--format", "json", "export", "unknown:1"]);
    let body: Value = serde_json::from_str(&out.out).unwrap();
    assert_eq!(body["error"]["code"], "OBJECT_NOT_FOUND");

    assert_eq!(dorepo(repo.path(), &["frobnicate"]).code, EXIT_USAGE);
    assert_eq!(dorepo(repo.path(), &["ingest"]).code, EXIT_USAGE);
    assert_eq!(dorepo(repo.path(), &["list", "--kind", "teapot"]).code, EXIT_USAGE);
    assert_eq!(dorepo(repo.path(), &["--help"]).code, EXIT_OK);
    assert_eq!(dorepo(repo.path(), &["export", "no-colon"]).code, EXIT_FAILURE);
    let missing = repo.path().join("absent.xml");
    assert_eq!(dorepo(repo.path(), &["ingest", missing.to_str().unwrap()]).code, EXIT_FAILURE);
}

#[test]
fn fsck_on_pristine_repository() {
    let repo = tempfile::tempdir().unwrap();
    let out = dorepo(repo.path(), &["fsck"]);
    assert_eq!((out.code, out.out.as_str()), (EXIT_OK, "0 issues\n"));
    let out = dorepo(repo.path(), &["--format", "json", "fsck"]);
    assert_eq!(serde_json::from_str::<Value>(&out.out).unwrap()["issues"], 0);
}
