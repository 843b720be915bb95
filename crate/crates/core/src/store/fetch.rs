use std::io::Read;
use std::time::Duration;

use crate::error::Error;
use crate::servicedesc::Verb;

pub struct FetchResponse {
    pub content_type: Option<String>,
    pub body: Box<dyn Read + Send>,
}

impl std::fmt::Debug for FetchResponse {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FetchResponse").field("content_type", &self.content_type).finish_non_exhaustive()
    }
}

/// Retrieves remote content. Non-2xx answers and timeouts surface as
/// [`Error::ExternalFetch`]; a successful response streams its body.
pub trait Fetcher: Send + Sync {
    fn fetch(&self, verb: Verb, url: &str) -> Result<FetchResponse, Error>;
}

/// HTTP(S) fetcher with a global timeout and a response-size cap.
#[derive(Debug, Clone)]
pub struct HttpFetcher {
    agent: ureq::Agent,
    max_bytes: u64,
}

impl HttpFetcher {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);
    pub const DEFAULT_MAX_BYTES: u64 = 256 * 1024 * 1024;

    pub fn new(timeout: Duration, max_bytes: u64) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .max_redirects(0)
            .build();
        Self {
            agent: ureq::Agent::new_with_config(config),
            max_bytes,
        }
    }
}

impl Default for HttpFetcher {
    fn default() -> Self {
        Self::new(Self::DEFAULT_TIMEOUT, Self::DEFAULT_MAX_BYTES)
    }
}

fn fetch_error(e: ureq::Error) -> Error {
    match e {
        ureq::Error::StatusCode(s) => Error::ExternalFetch {
            status: Some(s),
            timeout: false,
            detail: String::new(),
        },
        ureq::Error::Timeout(_) => Error::ExternalFetch {
            status: None,
            timeout: true,
            detail: String::new(),
        },
        // Transport errors can echo the host name; keep only the error class.
        other => Error::ExternalFetch {
            status: None,
            timeout: false,
            detail: format!("transport error ({})", error_class(&other)),
        },
    }
}

fn error_class(e: &ureq::Error) -> &'static str {
    match e {
        ureq::Error::Io(_) => "i/o",
        ureq::Error::ConnectionFailed => "connection failed",
        ureq::Error::HostNotFound => "host not found",
        ureq::Error::BadUri(_) => "bad uri",
        ureq::Error::TooManyRedirects | ureq::Error::RedirectFailed => "redirect",
        ureq::Error::BodyExceedsLimit(_) => "response too large",
        _ => "protocol",
    }
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, verb: Verb, url: &str) -> Result<FetchResponse, Error> {
        let resp = match verb {
            Verb::Get => self.agent.get(url).call(),
            // Query-string arguments travel as a form body.
            Verb::Post => {
                let (target, query) = url.split_once('?').unwrap_or((url, ""));
                self.agent
                    .post(target)
                    .content_type("application/x-www-form-urlencoded")
                    .send(query.as_bytes())
            }
        }
        .map_err(fetch_error)?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(Error::ExternalFetch {
                status: Some(status),
                timeout: false,
                detail: String::new(),
            });
        }
        let content_type = resp
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .map(str::to_owned);
        let body = resp.into_body().into_with_config().limit(self.max_bytes).reader();
        Ok(FetchResponse {
            content_type,
            body: Box::new(body),
        })
    }
}
