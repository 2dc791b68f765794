//! Document repository.
//!
//! Documents are self-describing JSON values stored under `(keyspace, key)`.
//! Every write bumps a store-wide revision counter and stamps the written
//! document with it; conditional writes compare against that stamp, which
//! gives compare-and-swap on single keys and all-or-nothing batches across
//! keys. Two implementations exist: [`MemoryStore`] for tests and embedding,
//! and [`FileStore`], an append-only log replayed on open.

mod file;
mod memory;

use std::fmt;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use file::FileStore;
pub use memory::MemoryStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Keyspace {
    Users,
    Collections,
    Files,
    Visas,
    Credentials,
    Requests,
    UploadQueue,
    /// Uniqueness claims on user email and login.
    UserIndex,
    /// Hashed bearer tokens.
    Sessions,
    /// Hashed one-time password reset tokens.
    ResetTokens,
    /// Uniqueness claims on (storage type, bucket, collection name).
    CollectionNames,
    /// Version ledger per dedup key.
    Lineages,
    Targets,
    Tickets,
    DownloadGrants,
    /// Uniqueness claims on pending (requester, collection) access requests.
    RequestIndex,
    Meta,
}

impl Keyspace {
    pub const ALL: [Keyspace; 17] = [
        Keyspace::Users,
        Keyspace::Collections,
        Keyspace::Files,
        Keyspace::Visas,
        Keyspace::Credentials,
        Keyspace::Requests,
        Keyspace::UploadQueue,
        Keyspace::UserIndex,
        Keyspace::Sessions,
        Keyspace::ResetTokens,
        Keyspace::CollectionNames,
        Keyspace::Lineages,
        Keyspace::Targets,
        Keyspace::Tickets,
        Keyspace::DownloadGrants,
        Keyspace::RequestIndex,
        Keyspace::Meta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Keyspace::Users => "users",
            Keyspace::Collections => "collections",
            Keyspace::Files => "files",
            Keyspace::Visas => "visas",
            Keyspace::Credentials => "credentials",
            Keyspace::Requests => "requests",
            Keyspace::UploadQueue => "upload_queue",
            Keyspace::UserIndex => "user_index",
            Keyspace::Sessions => "sessions",
            Keyspace::ResetTokens => "reset_tokens",
            Keyspace::CollectionNames => "collection_names",
            Keyspace::Lineages => "lineages",
            Keyspace::Targets => "targets",
            Keyspace::Tickets => "tickets",
            Keyspace::DownloadGrants => "download_grants",
            Keyspace::RequestIndex => "request_index",
            Keyspace::Meta => "meta",
        }
    }
}

impl fmt::Display for Keyspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A stored document and the revision at which it was last written.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub revision: u64,
    pub body: Arc<Value>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    /// A batch precondition did not hold; nothing was written.
    #[error("precondition failed on {keyspace}/{key}")]
    Conflict { keyspace: Keyspace, key: String },
    #[error("store i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt store: {0}")]
    Corrupt(String),
    #[error("document encoding: {0}")]
    Encoding(#[from] serde_json::Error),
}

impl StoreError {
    pub fn is_conflict(&self) -> bool {
        matches!(self, StoreError::Conflict { .. })
    }
}

/// Condition a key must satisfy for a batch to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expect {
    Absent,
    Revision(u64),
}

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Put {
        keyspace: Keyspace,
        key: String,
        body: Value,
        expect: Option<Expect>,
    },
    Delete {
        keyspace: Keyspace,
        key: String,
        expect: Option<Expect>,
    },
    /// Asserts a precondition without writing.
    Check {
        keyspace: Keyspace,
        key: String,
        expect: Expect,
    },
}

impl Op {
    fn target(&self) -> (Keyspace, &str) {
        match self {
            Op::Put { keyspace, key, .. }
            | Op::Delete { keyspace, key, .. }
            | Op::Check { keyspace, key, .. } => (*keyspace, key),
        }
    }

    fn expect(&self) -> Option<Expect> {
        match self {
            Op::Put { expect, .. } | Op::Delete { expect, .. } => *expect,
            Op::Check { expect, .. } => Some(*expect),
        }
    }
}

/// An atomic group of writes. Either every precondition holds and every
/// write lands, or nothing changes.
#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub(crate) ops: Vec<Op>,
}

fn to_body<T: Serialize + ?Sized>(doc: &T) -> Value {
    // Domain types are plain structs with string keys; encoding cannot fail.
    serde_json::to_value(doc).expect("document encodes as JSON")
}

impl Batch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn put<T: Serialize + ?Sized>(
        &mut self,
        keyspace: Keyspace,
        key: impl Into<String>,
        doc: &T,
    ) -> &mut Self {
        self.ops.push(Op::Put {
            keyspace,
            key: key.into(),
            body: to_body(doc),
            expect: None,
        });
        self
    }

    pub fn put_if<T: Serialize + ?Sized>(
        &mut self,
        keyspace: Keyspace,
        key: impl Into<String>,
        doc: &T,
        expect: Expect,
    ) -> &mut Self {
        self.ops.push(Op::Put {
            keyspace,
            key: key.into(),
            body: to_body(doc),
            expect: Some(expect),
        });
        self
    }

    pub fn insert<T: Serialize + ?Sized>(
        &mut self,
        keyspace: Keyspace,
        key: impl Into<String>,
        doc: &T,
    ) -> &mut Self {
        self.put_if(keyspace, key, doc, Expect::Absent)
    }

    pub fn delete(&mut self, keyspace: Keyspace, key: impl Into<String>) -> &mut Self {
        self.ops.push(Op::Delete {
            keyspace,
            key: key.into(),
            expect: None,
        });
        self
    }

    pub fn delete_if(
        &mut self,
        keyspace: Keyspace,
        key: impl Into<String>,
        revision: u64,
    ) -> &mut Self {
        self.ops.push(Op::Delete {
            keyspace,
            key: key.into(),
            expect: Some(Expect::Revision(revision)),
        });
        self
    }

    pub fn check(&mut self, keyspace: Keyspace, key: impl Into<String>, expect: Expect) -> &mut Self {
        self.ops.push(Op::Check {
            keyspace,
            key: key.into(),
            expect,
        });
        self
    }
}

/// Key/value document store with conditional batches.
pub trait DocumentStore: Send + Sync + fmt::Debug {
    fn get(&self, keyspace: Keyspace, key: &str) -> Result<Option<Document>, StoreError>;

    /// All documents in `keyspace` whose key starts with `prefix`, in key order.
    fn scan(&self, keyspace: Keyspace, prefix: &str) -> Result<Vec<(String, Document)>, StoreError>;

    /// Applies `batch` atomically and returns the revision stamped on its writes.
    fn apply(&self, batch: Batch) -> Result<u64, StoreError>;

    /// Revision of the latest applied batch; 0 for an empty store. Any
    /// write moves it forward.
    fn revision(&self) -> Result<u64, StoreError>;

    fn put(&self, keyspace: Keyspace, key: &str, body: Value) -> Result<u64, StoreError> {
        let mut batch = Batch::new();
        batch.put(keyspace, key, &body);
        self.apply(batch)
    }

    fn delete(&self, keyspace: Keyspace, key: &str) -> Result<(), StoreError> {
        let mut batch = Batch::new();
        batch.delete(keyspace, key);
        self.apply(batch).map(|_| ())
    }

    /// Replaces the document at `key` only if its revision still equals
    /// `expected` (`None` meaning "absent"). `new = None` deletes.
    fn compare_and_swap(
        &self,
        keyspace: Keyspace,
        key: &str,
        expected: Option<u64>,
        new: Option<Value>,
    ) -> Result<u64, StoreError> {
        let expect = match expected {
            Some(rev) => Expect::Revision(rev),
            None => Expect::Absent,
        };
        let mut batch = Batch::new();
        match new {
            Some(body) => batch.put_if(keyspace, key, &body, expect),
            None => match expect {
                Expect::Revision(rev) => batch.delete_if(keyspace, key, rev),
                Expect::Absent => batch.check(keyspace, key, Expect::Absent),
            },
        };
        self.apply(batch)
    }
}

/// A decoded document together with its revision.
#[derive(Debug, Clone, PartialEq)]
pub struct Stored<T> {
    pub key: String,
    pub revision: u64,
    pub value: T,
}

/// Typed access over a [`DocumentStore`].
#[derive(Debug, Clone)]
pub struct Repository {
    store: Arc<dyn DocumentStore>,
}

impl Repository {
    pub fn new(store: Arc<dyn DocumentStore>) -> Self {
        Self { store }
    }

    pub fn in_memory() -> Self {
        Self::new(Arc::new(MemoryStore::new()))
    }

    pub fn store(&self) -> &Arc<dyn DocumentStore> {
        &self.store
    }

    pub fn get<T: DeserializeOwned>(
        &self,
        keyspace: Keyspace,
        key: &str,
    ) -> Result<Option<Stored<T>>, StoreError> {
        self.store
            .get(keyspace, key)?
            .map(|doc| decode(keyspace, key.to_owned(), doc))
            .transpose()
    }

    pub fn scan<T: DeserializeOwned>(
        &self,
        keyspace: Keyspace,
        prefix: &str,
    ) -> Result<Vec<Stored<T>>, StoreError> {
        self.store
            .scan(keyspace, prefix)?
            .into_iter()
            .map(|(key, doc)| decode(keyspace, key, doc))
            .collect()
    }

    pub fn scan_raw(&self, keyspace: Keyspace) -> Result<Vec<(String, Document)>, StoreError> {
        self.store.scan(keyspace, "")
    }

    pub fn apply(&self, batch: Batch) -> Result<u64, StoreError> {
        self.store.apply(batch)
    }

    pub fn revision(&self) -> Result<u64, StoreError> {
        self.store.revision()
    }
}

pub(crate) fn decode<T: DeserializeOwned>(
    keyspace: Keyspace,
    key: String,
    doc: Document,
) -> Result<Stored<T>, StoreError> {
    let value = T::deserialize(doc.body.as_ref())
        .map_err(|e| StoreError::Corrupt(format!("{keyspace}/{key}: {e}")))?;
    Ok(Stored {
        key,
        revision: doc.revision,
        value,
    })
}
