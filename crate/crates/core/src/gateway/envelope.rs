use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, ErrorCode, FieldError};

pub fn status_for(code: ErrorCode) -> StatusCode {
    match code {
        ErrorCode::Validation => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorCode::Authentication => StatusCode::UNAUTHORIZED,
        ErrorCode::Forbidden => StatusCode::FORBIDDEN,
        ErrorCode::NotFound => StatusCode::NOT_FOUND,
        ErrorCode::Conflict => StatusCode::CONFLICT,
        ErrorCode::PreconditionFailed => StatusCode::PRECONDITION_FAILED,
        ErrorCode::Transport => StatusCode::BAD_GATEWAY,
        ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

/// Error half of the response envelope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<FieldError>,
}

impl ErrorBody {
    /// Client-facing rendering of `err`. Internal failures keep their
    /// detail server-side.
    pub fn from_error(err: &Error) -> Self {
        let code = err.code();
        let message = match code {
            ErrorCode::Internal => "internal error".to_owned(),
            _ => err.to_string(),
        };
        Self {
            code,
            message,
            details: err.field_errors().to_vec(),
        }
    }
}

#[derive(Debug)]
pub struct ApiError(pub Error);

impl<E: Into<Error>> From<E> for ApiError {
    fn from(e: E) -> Self {
        ApiError(e.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody::from_error(&self.0);
        if body.code == ErrorCode::Internal {
            tracing::error!(error = %self.0, "request failed");
        } else {
            tracing::debug!(code = body.code.as_str(), error = %self.0, "request rejected");
        }
        (status_for(body.code), Json(json!({ "ok": false, "error": body }))).into_response()
    }
}

/// Success envelope.
pub struct Reply<T>(pub StatusCode, pub T);

impl<T: Serialize> IntoResponse for Reply<T> {
    fn into_response(self) -> Response {
        match serde_json::to_value(&self.1) {
            Ok(data) => (self.0, Json(json!({ "ok": true, "data": data }))).into_response(),
            Err(e) => ApiError(Error::Internal(format!("encoding response: {e}"))).into_response(),
        }
    }
}

pub fn ok<T: Serialize>(data: T) -> Reply<T> {
    Reply(StatusCode::OK, data)
}

pub fn created<T: Serialize>(data: T) -> Reply<T> {
    Reply(StatusCode::CREATED, data)
}

pub type ApiResult<T> = Result<Reply<T>, ApiError>;

/// Splits a decoded envelope into its payload or error.
pub fn open_envelope(v: Value) -> Result<Value, ErrorBody> {
    if v.get("ok").and_then(Value::as_bool) == Some(true) {
        return Ok(v.get("data").cloned().unwrap_or(Value::Null));
    }
    let parsed = v
        .get("error")
        .cloned()
        .and_then(|e| serde_json::from_value::<ErrorBody>(e).ok());
    Err(parsed.unwrap_or(ErrorBody {
        code: ErrorCode::Internal,
        message: format!("malformed response envelope: {v}"),
        details: Vec::new(),
    }))
}
