use std::sync::Arc;

use axum::extract::FromRequestParts;
use axum::http::header::AUTHORIZATION;
use axum::http::request::Parts;

use super::envelope::ApiError;
use crate::error::Error;
use crate::governance::Principal;
use crate::services::Lakehouse;

fn bearer(parts: &Parts) -> Result<Option<&str>, ApiError> {
    let Some(value) = parts.headers.get(AUTHORIZATION) else {
        return Ok(None);
    };
    let value = value.to_str().map_err(|_| ApiError(Error::Authentication))?;
    match value.split_once(' ') {
        Some((scheme, token)) if scheme.eq_ignore_ascii_case("bearer") && !token.trim().is_empty() => {
            Ok(Some(token.trim()))
        }
        _ => Err(ApiError(Error::Authentication)),
    }
}

/// The authenticated caller. Rejects requests without a valid bearer token.
pub struct Caller(pub Principal);

impl FromRequestParts<Arc<Lakehouse>> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, lake: &Arc<Lakehouse>) -> Result<Self, ApiError> {
        let token = bearer(parts)?.ok_or(ApiError(Error::Authentication))?;
        Ok(Caller(lake.users().authenticate(token)?))
    }
}

/// Like [`Caller`] for endpoints that also serve anonymous requests. A
/// token that is present but invalid is still rejected.
pub struct MaybeCaller(pub Option<Principal>);

impl FromRequestParts<Arc<Lakehouse>> for MaybeCaller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, lake: &Arc<Lakehouse>) -> Result<Self, ApiError> {
        match bearer(parts)? {
            None => Ok(MaybeCaller(None)),
            Some(token) => Ok(MaybeCaller(Some(lake.users().authenticate(token)?))),
        }
    }
}
