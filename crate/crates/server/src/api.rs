//! HTTP routes for API-A (open) and API-M (token-guarded).

use std::collections::BTreeMap;
use std::io::Read;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{DefaultBodyLimit, Path, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use dorepo_core::{DatastreamChange, DisseminatorSpec, Error, NewContent, Pid, Repository, Timestamp};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::ApiError;

pub const AS_OF_PARAM: &str = "asOfDate";
/// Response header carrying a media-type mismatch reported by a mechanism.
pub const WARNING_HEADER: &str = "x-dissemination-warning";
/// Request header naming the principal recorded in audit records.
pub const PRINCIPAL_HEADER: &str = "x-principal";
pub const DEFAULT_PRINCIPAL: &str = "manager";
pub const MAX_UPLOAD_BYTES: usize = 256 * 1024 * 1024;
const STREAM_CHUNK: usize = 64 * 1024;

#[derive(Clone)]
pub struct AppState {
    pub repo: Arc<Repository>,
    pub token: Option<Arc<str>>,
}

pub fn router(state: AppState) -> Router {
    let manage = Router::new()
        .route("/ingest", post(ingest))
        .route("/{pid}", delete(purge))
        .route("/{pid}/export", get(export))
        .route("/{pid}/audit", get(audit))
        .route("/{pid}/datastreams/{dsid}", post(add_datastream).put(modify_datastream))
        .route("/{pid}/disseminators/{dissid}", post(add_disseminator).put(modify_disseminator))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));

    Router::new()
        .route("/access/{pid}/bdefs", get(bdefs))
        .route("/access/{pid}/methods/{bdef}", get(methods))
        .route("/access/{pid}/dissem/{bdef}/{method}", get(dissemination))
        .route("/get/{pid}/{dsid}", get(datastream))
        .route("/wsdl", get(wsdl))
        .nest("/manage", manage)
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", "no such route") })
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

/// Byte-wise comparison that does not stop at the first difference.
fn same_secret(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

/// A refusal sent before the request body is read. The unread body leaves the
/// connection unusable, so the client is told not to reuse it.
fn refuse(err: ApiError) -> Response {
    let mut response = err.into_response();
    response.headers_mut().insert(header::CONNECTION, HeaderValue::from_static("close"));
    response
}

async fn require_token(State(state): State<AppState>, request: Request, next: Next) -> Response {
    let Some(token) = &state.token else {
        return refuse(ApiError::new(
            StatusCode::FORBIDDEN,
            "MANAGEMENT_DISABLED",
            "no management token is configured",
        ));
    };
    let presented = request
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    match presented {
        Some(p) if same_secret(p.trim().as_bytes(), token.as_bytes()) => next.run(request).await,
        _ => refuse(ApiError::unauthorized()),
    }
}

/// Runs blocking repository work off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, Error> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
        .map_err(ApiError::from)
}

fn parse_pid(s: &str) -> Result<Pid, ApiError> {
    s.parse().map_err(ApiError::from)
}

/// Splits query pairs into `asOfDate` and the rest; repeated names are refused.
fn split_query(pairs: Vec<(String, String)>) -> Result<(Option<Timestamp>, BTreeMap<String, String>), ApiError> {
    let mut as_of = None;
    let mut rest = BTreeMap::new();
    for (k, v) in pairs {
        let duplicate = if k == AS_OF_PARAM {
            as_of.replace(v.parse::<Timestamp>()?).is_some()
        } else {
            rest.insert(k.clone(), v).is_some()
        };
        if duplicate {
            return Err(Error::InvalidArgument(format!("query parameter {k} given twice")).into());
        }
    }
    Ok((as_of, rest))
}

fn only_as_of(pairs: Vec<(String, String)>) -> Result<Option<Timestamp>, ApiError> {
    let (as_of, rest) = split_query(pairs)?;
    match rest.keys().next() {
        Some(k) => Err(Error::InvalidArgument(format!("unexpected query parameter {k}")).into()),
        None => Ok(as_of),
    }
}

/// Streams a blocking reader as a response body without buffering it whole.
fn stream_body(mut reader: Box<dyn Read + Send>) -> Body {
    let (tx, rx) = tokio::sync::mpsc::channel::<Result<Bytes, std::io::Error>>(4);
    tokio::task::spawn_blocking(move || {
        let mut buf = vec![0u8; STREAM_CHUNK];
        loop {
            match reader.read(&mut buf) {
                Ok(0) => break,
                Ok(n) => {
                    if tx.blocking_send(Ok(Bytes::copy_from_slice(&buf[..n]))).is_err() {
                        break;
                    }
                }
                Err(e) => {
                    let _ = tx.blocking_send(Err(e));
                    break;
                }
            }
        }
    });
    Body::from_stream(futures::stream::unfold(rx, |mut rx| async move {
        rx.recv().await.map(|item| (item, rx))
    }))
}

fn content_type(mime: &str) -> HeaderValue {
    HeaderValue::from_str(mime).unwrap_or_else(|_| HeaderValue::from_static("application/octet-stream"))
}

// ---- API-A ----

async fn bdefs(
    State(state): State<AppState>,
    Path(pid): Path<String>,
    Query(query): Query<Vec<(String, String)>>,
) -> Result<Response, ApiError> {
    let pid = parse_pid(&pid)?;
    let as_of = only_as_of(query)?;
    let repo = state.repo.clone();
    let p = pid.clone();
    let bdefs = blocking(move || repo.get_behavior_def_types(&p, as_of)).await?;
    Ok(Json(json!({ "pid": pid, "asOfDate": as_of, "bdefs": bdefs })).into_response())
}

#[derive(Serialize)]
struct MethodDoc {
    name: String,
    parameters: Vec<ParamDoc>,
}

#[derive(Serialize)]
struct ParamDoc {
    name: String,
    required: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    default: Option<String>,
}

async fn methods(
    State(state): State<AppState>,
    Path((pid, bdef)): Path<(String, String)>,
    Query(query): Query<Vec<(String, String)>>,
) -> Result<Response, ApiError> {
    let pid = parse_pid(&pid)?;
    let bdef = parse_pid(&bdef)?;
    let as_of = only_as_of(query)?;
    let repo = state.repo.clone();
    let p = pid.clone();
    let profile = blocking(move || repo.get_methods(&p, &bdef, as_of)).await?;
    let methods: Vec<MethodDoc> = profile
        .methods
        .into_iter()
        .map(|m| MethodDoc {
            name: m.name,
            parameters: m
                .user_params
                .into_iter()
                .map(|u| ParamDoc {
                    name: u.name,
                    required: u.required,
                    default: u.default,
                })
                .collect(),
        })
        .collect();
    Ok(Json(json!({
        "pid": pid,
        "bdefPid": profile.bdef_pid,
        "asOfDate": as_of,
        "methods": methods,
    }))
    .into_response())
}

async fn dissemination(
    State(state): State<AppState>,
    Path((pid, bdef, method)): Path<(String, String, String)>,
    Query(query): Query<Vec<(String, String)>>,
) -> Result<Response, ApiError> {
    let pid = parse_pid(&pid)?;
    let bdef = parse_pid(&bdef)?;
    let (as_of, user_args) = split_query(query)?;
    let repo = state.repo.clone();
    let d = blocking(move || repo.get_dissemination(&pid, &bdef, &method, &user_args, as_of)).await?;
    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, content_type(&d.mime_type));
    if let Some(w) = d.warning.as_deref().and_then(|w| HeaderValue::from_str(w).ok()) {
        headers.insert(WARNING_HEADER, w);
    }
    Ok((headers, stream_body(d.body)).into_response())
}

async fn datastream(
    State(state): State<AppState>,
    Path((pid, dsid)): Path<(String, String)>,
    Query(query): Query<Vec<(String, String)>>,
) -> Result<Response, ApiError> {
    let pid = parse_pid(&pid)?;
    let as_of = only_as_of(query)?;
    let repo = state.repo.clone();
    let content = blocking(move || repo.get_datastream_direct(&pid, &dsid, as_of)).await?;
    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, content_type(&content.mime_type));
    if let Some(len) = content.length {
        headers.insert(header::CONTENT_LENGTH, HeaderValue::from(len));
    }
    Ok((headers, stream_body(content.body)).into_response())
}

async fn wsdl(State(state): State<AppState>) -> Response {
    let doc = crate::wsdl::service_description(state.repo.base_url());
    ([(header::CONTENT_TYPE, "text/xml")], doc).into_response()
}

// ---- API-M ----

#[derive(Deserialize)]
struct ManageQuery {
    #[serde(default)]
    justification: String,
    #[serde(rename = "mimeType")]
    mime_type: Option<String>,
    location: Option<String>,
    content: Option<String>,
}

fn principal(headers: &HeaderMap) -> String {
    headers
        .get(PRINCIPAL_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .unwrap_or(DEFAULT_PRINCIPAL)
        .to_owned()
}

fn header_mime(headers: &HeaderMap) -> Option<String> {
    headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .map(str::to_owned)
}

/// Content from the request: an external `location`, or the body bytes.
fn new_content(q: &ManageQuery, body: Bytes) -> Result<Option<NewContent>, ApiError> {
    match (&q.location, body.is_empty()) {
        (Some(_), false) => {
            Err(Error::InvalidArgument("give either a location or a request body, not both".into()).into())
        }
        (Some(url), true) => Ok(Some(NewContent::External(url.clone()))),
        (None, false) => Ok(Some(NewContent::Internal(body.to_vec()))),
        (None, true) => Ok(None),
    }
}

async fn ingest(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<ManageQuery>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let repo = state.repo.clone();
    let who = principal(&headers);
    let pid = blocking(move || repo.ingest(&body, &who, &q.justification)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "pid": pid }))).into_response())
}

fn component_created(status: StatusCode, pid: Pid, id: String, version: String) -> Response {
    (status, Json(json!({ "pid": pid, "componentId": id, "versionId": version }))).into_response()
}

async fn add_datastream(
    State(state): State<AppState>,
    Path((pid, dsid)): Path<(String, String)>,
    headers: HeaderMap,
    Query(q): Query<ManageQuery>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let pid = parse_pid(&pid)?;
    let explicit = q.mime_type.clone();
    let content = new_content(&q, body)?
        .ok_or_else(|| Error::InvalidArgument("a new datastream needs a location or a request body".into()))?;
    let mime = match (&content, explicit) {
        (_, Some(m)) => m,
        (NewContent::Internal(_), None) => header_mime(&headers)
            .ok_or_else(|| Error::InvalidArgument("mimeType or Content-Type is required".into()))?,
        (NewContent::External(_), None) => {
            return Err(Error::InvalidArgument("mimeType is required with a location".into()).into())
        }
    };
    let repo = state.repo.clone();
    let who = principal(&headers);
    let (p, id) = (pid.clone(), dsid.clone());
    let version = blocking(move || repo.add_datastream(&p, &id, &mime, content, &who, &q.justification)).await?;
    Ok(component_created(StatusCode::CREATED, pid, dsid, version))
}

async fn modify_datastream(
    State(state): State<AppState>,
    Path((pid, dsid)): Path<(String, String)>,
    headers: HeaderMap,
    Query(q): Query<ManageQuery>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let pid = parse_pid(&pid)?;
    let content = new_content(&q, body)?;
    let mime_type = q.mime_type.clone().or_else(|| match content {
        Some(NewContent::Internal(_)) => header_mime(&headers),
        _ => None,
    });
    let change = DatastreamChange { mime_type, content };
    let repo = state.repo.clone();
    let who = principal(&headers);
    let (p, id) = (pid.clone(), dsid.clone());
    let version = blocking(move || repo.modify_datastream(&p, &id, change, &who, &q.justification)).await?;
    Ok(component_created(StatusCode::OK, pid, dsid, version))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct DisseminatorBody {
    bdef_pid: String,
    bmech_pid: String,
    #[serde(default)]
    binding_map: BTreeMap<String, String>,
}

fn disseminator_spec(body: &[u8]) -> Result<DisseminatorSpec, ApiError> {
    let parsed: DisseminatorBody = serde_json::from_slice(body)
        .map_err(|e| Error::InvalidArgument(format!("disseminator body: {e}")))?;
    Ok(DisseminatorSpec {
        bdef_pid: parse_pid(&parsed.bdef_pid)?,
        bmech_pid: parse_pid(&parsed.bmech_pid)?,
        binding_map: parsed.binding_map,
    })
}

async fn add_disseminator(
    State(state): State<AppState>,
    Path((pid, dissid)): Path<(String, String)>,
    headers: HeaderMap,
    Query(q): Query<ManageQuery>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let pid = parse_pid(&pid)?;
    let spec = disseminator_spec(&body)?;
    let repo = state.repo.clone();
    let who = principal(&headers);
    let (p, id) = (pid.clone(), dissid.clone());
    let version = blocking(move || repo.add_disseminator(&p, &id, &spec, &who, &q.justification)).await?;
    Ok(component_created(StatusCode::CREATED, pid, dissid, version))
}

async fn modify_disseminator(
    State(state): State<AppState>,
    Path((pid, dissid)): Path<(String, String)>,
    headers: HeaderMap,
    Query(q): Query<ManageQuery>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let pid = parse_pid(&pid)?;
    let spec = disseminator_spec(&body)?;
    let repo = state.repo.clone();
    let who = principal(&headers);
    let (p, id) = (pid.clone(), dissid.clone());
    let version = blocking(move || repo.modify_disseminator(&p, &id, &spec, &who, &q.justification)).await?;
    Ok(component_created(StatusCode::OK, pid, dissid, version))
}

async fn purge(
    State(state): State<AppState>,
    Path(pid): Path<String>,
    headers: HeaderMap,
    Query(q): Query<ManageQuery>,
) -> Result<Response, ApiError> {
    let pid = parse_pid(&pid)?;
    let repo = state.repo.clone();
    let who = principal(&headers);
    let p = pid.clone();
    blocking(move || repo.purge_object(&p, &who, &q.justification)).await?;
    Ok(Json(json!({ "pid": pid, "purged": true })).into_response())
}

async fn export(
    State(state): State<AppState>,
    Path(pid): Path<String>,
    Query(q): Query<ManageQuery>,
) -> Result<Response, ApiError> {
    let pid = parse_pid(&pid)?;
    let inline = match q.content.as_deref() {
        None | Some("reference") => false,
        Some("inline") => true,
        Some(other) => {
            return Err(Error::InvalidArgument(format!("content must be inline or reference, not {other:?}")).into())
        }
    };
    let repo = state.repo.clone();
    let doc = blocking(move || if inline { repo.export_with_content(&pid) } else { repo.export(&pid) }).await?;
    Ok(([(header::CONTENT_TYPE, "text/xml")], doc).into_response())
}

async fn audit(State(state): State<AppState>, Path(pid): Path<String>) -> Result<Response, ApiError> {
    let pid = parse_pid(&pid)?;
    let repo = state.repo.clone();
    let p = pid.clone();
    let trail = blocking(move || repo.audit_trail(&p)).await?;
    Ok(Json(json!({ "pid": pid, "auditTrail": trail })).into_response())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn secret_comparison() {
        assert!(same_secret(b"abc", b"abc"));
        assert!(!same_secret(b"abc", b"abd"));
        assert!(!same_secret(b"abc", b"abcd"));
    }

    #[test]
    fn query_splitting() {
        let q = |pairs: &[(&str, &str)]| pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        let (as_of, rest) = split_query(q(&[("asOfDate", "2002-05-01T00:00:00"), ("TEXT", "x")])).unwrap();
        assert_eq!(as_of.unwrap().to_string(), "2002-05-01T00:00:00");
        assert_eq!(rest["TEXT"], "x");
        assert!(split_query(q(&[("asOfDate", "yesterday")])).is_err());
        assert!(split_query(q(&[("A", "1"), ("A", "2")])).is_err());
        assert!(only_as_of(q(&[("A", "1")])).is_err());
    }
}
