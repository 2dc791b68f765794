use std::fmt;

use async_trait::async_trait;
use bytes::Bytes;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use url::Url;

use super::StorageType;
use crate::error::Error;

/// A validated relative object path: `/`-separated, no empty, `.` or `..`
/// segments, no backslashes or control characters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ObjectPath(String);

impl ObjectPath {
    pub const MAX_LEN: usize = 1024;

    pub fn parse(raw: impl Into<String>) -> Result<Self, StorageError> {
        let raw = raw.into();
        let bad = |why: &str| Err(StorageError::InvalidPath(format!("`{raw}`: {why}")));
        if raw.is_empty() {
            return bad("empty path");
        }
        if raw.len() > Self::MAX_LEN {
            return bad("path too long");
        }
        if raw.contains('\\') || raw.chars().any(char::is_control) {
            return bad("illegal character");
        }
        for segment in raw.split('/') {
            if segment.is_empty() || segment == "." || segment == ".." {
                return bad("illegal path segment");
            }
        }
        Ok(Self(raw))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn segments(&self) -> impl Iterator<Item = &str> {
        self.0.split('/')
    }
}

impl TryFrom<String> for ObjectPath {
    type Error = StorageError;

    fn try_from(s: String) -> Result<Self, StorageError> {
        Self::parse(s)
    }
}

impl From<ObjectPath> for String {
    fn from(p: ObjectPath) -> String {
        p.0
    }
}

impl fmt::Display for ObjectPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectMeta {
    pub size: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferKind {
    Upload,
    Download,
}

/// What a backend needs to mint a direct transfer URL.
#[derive(Debug, Clone)]
pub struct DirectTransfer<'a> {
    pub kind: TransferKind,
    /// Ticket or grant id; the capability embedded in gateway-served URLs.
    pub capability: &'a str,
    pub path: &'a ObjectPath,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, thiserror::Error)]
pub enum StorageError {
    #[error("{0} adapter not configured")]
    NotConfigured(StorageType),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("invalid object path {0}")]
    InvalidPath(String),
}

impl From<StorageError> for Error {
    fn from(err: StorageError) -> Self {
        match err {
            StorageError::InvalidPath(msg) => Error::invalid("path", msg),
            other => Error::Transport(other.to_string()),
        }
    }
}

/// Contract every storage adapter implements. Implementations must be safe
/// for concurrent calls on distinct paths and must never expose a
/// partially written object through `get`, `head` or `list`.
#[async_trait]
pub trait ObjectBackend: Send + Sync + fmt::Debug {
    fn storage_type(&self) -> StorageType;

    /// Stores `body` at `path`, replacing any previous object. Returns the
    /// number of bytes written.
    async fn put(&self, path: &ObjectPath, body: Bytes) -> Result<u64, StorageError>;

    async fn get(&self, path: &ObjectPath) -> Result<Option<Bytes>, StorageError>;

    async fn head(&self, path: &ObjectPath) -> Result<Option<ObjectMeta>, StorageError>;

    async fn exists(&self, path: &ObjectPath) -> Result<bool, StorageError> {
        Ok(self.head(path).await?.is_some())
    }

    /// Idempotent: deleting an absent object succeeds.
    async fn delete(&self, path: &ObjectPath) -> Result<(), StorageError>;

    /// Every stored object path, sorted.
    async fn list(&self) -> Result<Vec<ObjectPath>, StorageError>;

    /// URL through which a client transfers bytes directly. `gateway` is
    /// the public base URL of the service, used by backends whose direct
    /// endpoint is the gateway itself.
    fn direct_url(&self, transfer: &DirectTransfer<'_>, gateway: &Url) -> Result<Url, StorageError>;
}
