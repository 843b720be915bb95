#![allow(dead_code)]

use std::net::TcpListener;
use std::path::Path;
use std::sync::Arc;

use dorepo_core::{Repository, RepositoryConfig};
use dorepo_harness::StubServers;
use dorepo_server::ServerHandle;

pub const TOKEN: &str = "test-token";

/// Real stub services and a real server on loopback ports, over a repository in `root`.
pub struct Bench {
    pub stubs: StubServers,
    pub repo: Arc<Repository>,
    pub server: ServerHandle,
}

impl Bench {
    pub fn start(root: &Path) -> Self {
        Self::with_stubs(root, StubServers::spawn("127.0.0.1", [0; 4]).unwrap())
    }

    pub fn with_stubs(root: &Path, stubs: StubServers) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base_url = format!("http://{}", listener.local_addr().unwrap());
        let repo = Arc::new(Repository::open(&RepositoryConfig::new(root, base_url)).unwrap());
        let server = ServerHandle::spawn(Arc::clone(&repo), listener, Some(TOKEN.to_owned())).unwrap();
        Self { stubs, repo, server }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.server.url())
    }
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

/// Status, headers flattened to `name: value` lines, and body.
pub fn get(url: &str) -> (u16, String, Vec<u8>) {
    let mut resp = agent().get(url).call().unwrap();
    let headers = resp
        .headers()
        .iter()
        .map(|(k, v)| format!("{k}: {}\n", String::from_utf8_lossy(v.as_bytes())))
        .collect();
    (resp.status().as_u16(), headers, resp.body_mut().read_to_vec().unwrap())
}

/// `--stub-ports` value for running stubs.
pub fn port_list(stubs: &StubServers) -> String {
    let ep = stubs.endpoints();
    [&ep.watermarker, &ep.resizer, &ep.echo, &ep.content]
        .iter()
        .map(|u| u.rsplit(':').next().unwrap())
        .collect::<Vec<_>>()
        .join(",")
}
