//! Request validation. Every body and query string is checked field by
//! field before a handler runs; all failures are reported together.

use std::collections::{BTreeSet, HashMap};
use std::str::FromStr;

use axum::body::Bytes;
use axum::extract::{FromRequest, FromRequestParts, Query, Request};
use axum::http::request::Parts;
use serde_json::{Map, Value};

use super::envelope::ApiError;
use crate::catalogue::Page;
use crate::error::{Error, FieldError};

/// Field-by-field reader over a JSON object or a query string.
#[derive(Debug, Default)]
pub struct Fields {
    map: Map<String, Value>,
    known: BTreeSet<&'static str>,
    errors: Vec<FieldError>,
    from_query: bool,
}

pub const MAX_TEXT: usize = 1024;

impl Fields {
    pub fn from_body(bytes: &[u8]) -> Result<Self, Error> {
        if bytes.iter().all(u8::is_ascii_whitespace) {
            return Ok(Self::default());
        }
        match serde_json::from_slice::<Value>(bytes) {
            Ok(Value::Object(map)) => Ok(Self {
                map,
                ..Self::default()
            }),
            Ok(_) => Err(Error::invalid("body", "must be a JSON object")),
            Err(e) => Err(Error::invalid("body", format!("malformed JSON: {e}"))),
        }
    }

    pub fn from_query(params: HashMap<String, String>) -> Self {
        Self {
            map: params.into_iter().map(|(k, v)| (k, Value::String(v))).collect(),
            from_query: true,
            ..Self::default()
        }
    }

    fn fail(&mut self, field: &str, msg: impl Into<String>) {
        self.errors.push(FieldError::new(field, msg));
    }

    /// Records a failure found by cross-field checks.
    pub fn error(&mut self, field: &str, msg: impl Into<String>) {
        self.fail(field, msg);
    }

    /// Records the field failures of a domain validation error.
    pub fn absorb(&mut self, err: Error) {
        match err {
            Error::Validation(fields) => self.errors.extend(fields),
            other => self.fail("body", other.to_string()),
        }
    }

    pub fn has_error(&self, field: &str) -> bool {
        self.errors.iter().any(|e| e.field == field)
    }

    pub fn has_errors(&self) -> bool {
        !self.errors.is_empty()
    }

    fn take(&mut self, field: &'static str) -> Option<Value> {
        self.known.insert(field);
        match self.map.get(field) {
            None | Some(Value::Null) => None,
            Some(v) => Some(v.clone()),
        }
    }

    pub fn opt_str(&mut self, field: &'static str, max_len: usize) -> Option<String> {
        match self.take(field)? {
            Value::String(s) if s.chars().count() > max_len => {
                self.fail(field, format!("at most {max_len} characters"));
                None
            }
            Value::String(s) => Some(s),
            _ => {
                self.fail(field, "must be a string");
                None
            }
        }
    }

    pub fn req_str(&mut self, field: &'static str, max_len: usize) -> Option<String> {
        let present = self.map.get(field).is_some_and(|v| !v.is_null());
        let v = self.opt_str(field, max_len);
        if !present {
            self.fail(field, "required");
        } else if v.as_deref().is_some_and(|s| s.trim().is_empty()) {
            self.fail(field, "must not be empty");
            return None;
        }
        v
    }

    pub fn opt_parse<T: FromStr<Err = String>>(&mut self, field: &'static str) -> Option<T> {
        let raw = self.opt_str(field, MAX_TEXT)?;
        match raw.parse() {
            Ok(v) => Some(v),
            Err(m) => {
                self.fail(field, m);
                None
            }
        }
    }

    pub fn req_parse<T: FromStr<Err = String>>(&mut self, field: &'static str) -> Option<T> {
        if !self.map.get(field).is_some_and(|v| !v.is_null()) {
            self.known.insert(field);
            self.fail(field, "required");
            return None;
        }
        self.opt_parse(field)
    }

    pub fn opt_uint(&mut self, field: &'static str, max: u64) -> Option<u64> {
        let v = self.take(field)?;
        let n = match &v {
            Value::Number(n) => n.as_u64(),
            Value::String(s) if self.from_query => s.parse::<u64>().ok(),
            _ => None,
        };
        match n {
            Some(n) if n <= max => Some(n),
            Some(_) => {
                self.fail(field, format!("at most {max}"));
                None
            }
            None => {
                self.fail(field, "must be a non-negative integer");
                None
            }
        }
    }

    pub fn opt_str_list(&mut self, field: &'static str, max_items: usize) -> Option<Vec<String>> {
        let v = self.take(field)?;
        let Value::Array(items) = v else {
            self.fail(field, "must be an array of strings");
            return None;
        };
        if items.len() > max_items {
            self.fail(field, format!("at most {max_items} entries"));
            return None;
        }
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            match item {
                Value::String(s) if s.len() <= MAX_TEXT => out.push(s),
                _ => {
                    self.fail(field, "must be an array of strings");
                    return None;
                }
            }
        }
        Some(out)
    }

    /// Reads `offset` and `limit` as a page.
    pub fn page(&mut self) -> Option<Option<Page>> {
        let offset = self.opt_uint("offset", u32::MAX as u64);
        let limit = self.opt_uint("limit", u32::MAX as u64);
        if offset.is_none() && limit.is_none() {
            return Some(None);
        }
        match Page::new(offset.map(|o| o as usize), limit.map(|l| l as usize)) {
            Ok(p) => Some(Some(p)),
            Err(e) => {
                self.errors.extend(e.field_errors().iter().cloned());
                None
            }
        }
    }

    /// Rejects unknown fields and returns every collected failure.
    pub fn finish(mut self) -> Result<(), Error> {
        let unknown: Vec<String> = self
            .map
            .keys()
            .filter(|k| !self.known.contains(k.as_str()))
            .cloned()
            .collect();
        for k in unknown {
            self.fail(&k, "unknown field");
        }
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(self.errors))
        }
    }
}

/// A request payload that can be read from [`Fields`].
pub trait Validate: Sized {
    /// Reads every field; returns `None` if any read failed.
    fn read(f: &mut Fields) -> Option<Self>;

    fn from_fields(mut f: Fields) -> Result<Self, Error> {
        let v = Self::read(&mut f);
        f.finish()?;
        v.ok_or_else(|| Error::Internal("validator returned no value without errors".into()))
    }
}

/// Validated JSON body.
pub struct Valid<T>(pub T);

impl<S: Send + Sync, T: Validate> FromRequest<S> for Valid<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError(Error::invalid("body", e.body_text())))?;
        let fields = Fields::from_body(&bytes)?;
        Ok(Valid(T::from_fields(fields)?))
    }
}

/// Validated query string.
pub struct ValidQuery<T>(pub T);

impl<S: Send + Sync, T: Validate> FromRequestParts<S> for ValidQuery<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        let Query(params) = Query::<HashMap<String, String>>::from_request_parts(parts, state)
            .await
            .map_err(|e| ApiError(Error::invalid("query", e.body_text())))?;
        Ok(ValidQuery(T::from_fields(Fields::from_query(params))?))
    }
}
