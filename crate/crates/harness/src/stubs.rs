//! Deterministic stand-ins for external behavior mechanism services.
//!
//! * `watermarker`: `GET /watermark?src=<url>&text=<t>` returns `WM[<t>]` + the source bytes
//! * `resizer`: `GET /resize?src=<url>&size=<n|full>` returns the first `n` source bytes
//! * `echo`: `GET /echo?src=<url>` returns the source bytes unchanged
//! * `content`: `GET /content/<name>` returns fixed bytes derived from `name`

use std::io;
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::extract::{Path, RawQuery, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use dorepo_core::demo::{self, StubEndpoints};
use tokio::sync::oneshot;

const FETCH_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stub {
    Watermarker,
    Resizer,
    Echo,
    Content,
}

impl Stub {
    /// In the order of [`StubEndpoints::on_host`] ports.
    pub const ALL: [Stub; 4] = [Stub::Watermarker, Stub::Resizer, Stub::Echo, Stub::Content];

    pub fn name(self) -> &'static str {
        match self {
            Stub::Watermarker => "watermarker",
            Stub::Resizer => "resizer",
            Stub::Echo => "echo",
            Stub::Content => "content",
        }
    }
}

#[derive(Clone)]
struct StubState {
    agent: ureq::Agent,
    log: Arc<Mutex<Vec<String>>>,
}

fn plain(status: StatusCode, message: &str) -> Response {
    (status, message.to_owned()).into_response()
}

/// Fetches a `src` URL on a blocking thread.
async fn fetch(agent: &ureq::Agent, url: String) -> Result<(String, Vec<u8>), Response> {
    let agent = agent.clone();
    let result = tokio::task::spawn_blocking(move || -> Result<(String, Vec<u8>), String> {
        let mut resp = agent.get(&url).call().map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("source answered {}", resp.status()));
        }
        let mime = resp
            .headers()
            .get(header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .unwrap_or("application/octet-stream")
            .to_owned();
        let body = resp.body_mut().read_to_vec().map_err(|e| e.to_string())?;
        Ok((mime, body))
    })
    .await;
    match result {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(plain(StatusCode::BAD_GATEWAY, &e)),
        Err(e) => Err(plain(StatusCode::INTERNAL_SERVER_ERROR, &e.to_string())),
    }
}

fn record(state: &StubState, stub: Stub, uri: &Uri) {
    state.log.lock().unwrap().push(format!("{} {uri}", stub.name()));
}

fn arg(pairs: &[(String, String)], name: &str) -> Option<String> {
    pairs.iter().find(|(k, _)| k == name).map(|(_, v)| v.clone())
}

async fn transform(state: StubState, stub: Stub, uri: Uri, query: Option<String>) -> Response {
    record(&state, stub, &uri);
    let pairs = demo::query_pairs(query.as_deref().unwrap_or(""));
    let Some(src) = arg(&pairs, "src") else {
        return plain(StatusCode::BAD_REQUEST, "src is required");
    };
    let (mime, input) = match fetch(&state.agent, src).await {
        Ok(v) => v,
        Err(resp) => return resp,
    };
    let output = match stub {
        Stub::Watermarker => demo::watermark(&arg(&pairs, "text").unwrap_or_default(), &input),
        Stub::Resizer => match demo::resize(&arg(&pairs, "size").unwrap_or_else(|| "full".into()), &input) {
            Some(out) => out,
            None => return plain(StatusCode::BAD_REQUEST, "size must be a number or full"),
        },
        Stub::Echo | Stub::Content => input,
    };
    ([(header::CONTENT_TYPE, mime)], output).into_response()
}

fn stub_router(stub: Stub, state: StubState) -> Router {
    let route = |path: &'static str| {
        Router::new().route(
            path,
            get(move |State(s): State<StubState>, uri: Uri, RawQuery(q): RawQuery| transform(s, stub, uri, q)),
        )
    };
    let router = match stub {
        Stub::Watermarker => route("/watermark"),
        Stub::Resizer => route("/resize"),
        Stub::Echo => route("/echo"),
        Stub::Content => Router::new().route(
            "/content/{name}",
            get(|State(s): State<StubState>, uri: Uri, Path(name): Path<String>| async move {
                record(&s, Stub::Content, &uri);
                ([(header::CONTENT_TYPE, demo::IMAGE_MIME)], demo::served_content(&name)).into_response()
            }),
        ),
    };
    router.with_state(state)
}

/// The four stub services, each on its own port, sharing one runtime thread.
pub struct StubServers {
    endpoints: StubEndpoints,
    log: Arc<Mutex<Vec<String>>>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl StubServers {
    /// Binds `host` on `ports` (watermarker, resizer, echo, content); port 0
    /// picks a free one.
    pub fn spawn(host: &str, ports: [u16; 4]) -> io::Result<Self> {
        let mut listeners = Vec::new();
        let mut bound = [0u16; 4];
        for (i, port) in ports.into_iter().enumerate() {
            let l = TcpListener::bind((host, port))?;
            l.set_nonblocking(true)?;
            bound[i] = l.local_addr()?.port();
            listeners.push(l);
        }
        let endpoints = StubEndpoints::on_host(host, bound);
        let log = Arc::new(Mutex::new(Vec::new()));
        let state = StubState {
            agent: ureq::Agent::config_builder()
                .timeout_global(Some(FETCH_TIMEOUT))
                .http_status_as_error(false)
                .build()
                .into(),
            log: log.clone(),
        };
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::Builder::new().name("dorepo-stubs".into()).spawn(move || {
            let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            runtime.block_on(async move {
                let (stop_tx, _) = tokio::sync::broadcast::channel::<()>(1);
                let mut tasks = Vec::new();
                for (stub, listener) in Stub::ALL.into_iter().zip(listeners) {
                    let listener = tokio::net::TcpListener::from_std(listener)?;
                    let mut stop = stop_tx.subscribe();
                    let app = stub_router(stub, state.clone());
                    tasks.push(tokio::spawn(async move {
                        axum::serve(listener, app)
                            .with_graceful_shutdown(async move {
                                let _ = stop.recv().await;
                            })
                            .await
                    }));
                }
                let _ = rx.await;
                let _ = stop_tx.send(());
                for t in tasks {
                    t.await.map_err(io::Error::other)??;
                }
                Ok(())
            })
        })?;
        Ok(Self {
            endpoints,
            log,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn endpoints(&self) -> &StubEndpoints {
        &self.endpoints
    }

    /// Every request received, as `<stub> <path?query>`, in arrival order.
    pub fn requests(&self) -> Vec<String> {
        self.log.lock().unwrap().clone()
    }

    /// Blocks until the services stop.
    pub fn wait(mut self) -> io::Result<()> {
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(io::Error::other("stub thread panicked"))),
            None => Ok(()),
        }
    }

    fn stop(&mut self) -> io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(io::Error::other("stub thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for StubServers {
    fn drop(&mut self) {
        let _ = self.stop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn get(url: &str) -> (u16, Vec<u8>) {
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        let mut resp = agent.get(url).call().unwrap();
        (resp.status().as_u16(), resp.body_mut().read_to_vec().unwrap())
    }

    #[test]
    fn transforms_over_http() {
        let stubs = StubServers::spawn("127.0.0.1", [0; 4]).unwrap();
        let ep = stubs.endpoints().clone();
        let src = format!("{}/content/abc", ep.content);
        let input = demo::served_content("abc");

        assert_eq!(get(&format!("{}/echo?src={src}", ep.echo)), (200, input.clone()));
        assert_eq!(get(&format!("{}/resize?src={src}&size=3", ep.resizer)), (200, input[..3].to_vec()));
        assert_eq!(
            get(&format!("{}/watermark?src={src}&text=draft%20copy", ep.watermarker)),
            (200, demo::watermark("draft copy", &input))
        );
        assert_eq!(get(&format!("{}/resize?src={src}&size=huge", ep.resizer)).0, 400);
        assert_eq!(get(&format!("{}/echo", ep.echo)).0, 400);
        assert_eq!(get(&format!("{}/echo?src={}/nothing", ep.echo, ep.echo)).0, 502);

        let log = stubs.requests();
        assert_eq!(log[0], format!("echo /echo?src={src}"));
        assert_eq!(log[1], "content /content/abc");
    }
}
