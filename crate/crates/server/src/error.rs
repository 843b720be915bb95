//! Mapping from the repository error taxonomy to HTTP responses.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use dorepo_core::Error;
use serde::Serialize;

/// JSON error body. `code` is [`Error::code`] or one of the server's own
/// codes (`UNAUTHORIZED`, `MANAGEMENT_DISABLED`, `NOT_FOUND`, `INTERNAL`).
#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violations: Option<serde_json::Value>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code,
                message: message.into(),
                violations: None,
            },
        }
    }

    pub fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "UNAUTHORIZED", "missing or invalid management token")
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", message)
    }
}

pub fn status_of(err: &Error) -> StatusCode {
    match err {
        Error::InvalidPid(_)
        | Error::InvalidTimestamp(_)
        | Error::InvalidComponentId(_)
        | Error::InvalidArgument(_)
        | Error::MissingRequiredParam(_) => StatusCode::BAD_REQUEST,
        Error::XmlParse(_) | Error::Structural(_) | Error::Descriptor(_) | Error::Integrity(_) => {
            StatusCode::UNPROCESSABLE_ENTITY
        }
        e if e.is_not_found() => StatusCode::NOT_FOUND,
        Error::PidCollision(_) | Error::InUse { .. } | Error::ClockSkew { .. } | Error::DuplicateComponent { .. } => {
            StatusCode::CONFLICT
        }
        Error::ExternalFetch { .. } => StatusCode::BAD_GATEWAY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let violations = match &err {
            Error::Structural(v) => serde_json::to_value(v).ok(),
            Error::Integrity(v) => serde_json::to_value(v).ok(),
            Error::Descriptor(d) => serde_json::to_value([d]).ok(),
            Error::InUse { dependents, .. } => {
                serde_json::to_value(dependents.iter().map(ToString::to_string).collect::<Vec<_>>()).ok()
            }
            _ => None,
        };
        let status = status_of(&err);
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            log::error!("{err}");
        }
        Self {
            status,
            body: ErrorBody {
                code: err.code(),
                message: err.to_string(),
                violations,
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dorepo_core::Pid;

    #[test]
    fn classes() {
        let pid: Pid = "demo:1".parse().unwrap();
        let cases = [
            (Error::ObjectNotFound(pid.clone()), 404),
            (Error::NoVersionAtTime { as_of: None }, 404),
            (Error::InvalidTimestamp("x".into()), 400),
            (Error::PidCollision(pid.clone()), 409),
            (Error::Integrity(vec![]), 422),
            (Error::ExternalFetch { status: Some(500), timeout: false, detail: String::new() }, 502),
            (Error::BindingIntegrity("x".into()), 500),
        ];
        for (err, status) in cases {
            assert_eq!(status_of(&err).as_u16(), status, "{err}");
        }
        let api = ApiError::from(Error::InUse { pid: pid.clone(), dependents: vec![pid] });
        assert_eq!(api.body.code, "IN_USE");
        assert_eq!(api.body.violations, Some(serde_json::json!(["demo:1"])));
    }
}
