use std::collections::BTreeMap;
use std::ops::Bound;
use std::sync::{Arc, RwLock};

use serde_json::Value;

use super::{Batch, Document, DocumentStore, Expect, Keyspace, Op, StoreError};

/// The in-memory table shared by both store implementations.
#[derive(Debug, Default)]
pub(crate) struct Table {
    docs: BTreeMap<Keyspace, BTreeMap<String, Document>>,
    revision: u64,
}

/// A fully validated write, ready to be made durable and applied.
#[derive(Debug)]
pub(crate) enum Write {
    Put {
        keyspace: Keyspace,
        key: String,
        body: Value,
    },
    Delete {
        keyspace: Keyspace,
        key: String,
    },
}

impl Table {
    pub(crate) fn revision(&self) -> u64 {
        self.revision
    }

    pub(crate) fn get(&self, keyspace: Keyspace, key: &str) -> Option<&Document> {
        self.docs.get(&keyspace).and_then(|ks| ks.get(key))
    }

    pub(crate) fn scan(&self, keyspace: Keyspace, prefix: &str) -> Vec<(String, Document)> {
        let Some(ks) = self.docs.get(&keyspace) else {
            return Vec::new();
        };
        ks.range::<str, _>((Bound::Included(prefix), Bound::Unbounded))
            .take_while(|(k, _)| k.starts_with(prefix))
            .map(|(k, d)| (k.clone(), d.clone()))
            .collect()
    }

    /// Checks every precondition of `batch` against the current state.
    pub(crate) fn prepare(&self, batch: Batch) -> Result<Vec<Write>, StoreError> {
        for op in &batch.ops {
            if let Some(expect) = op.expect() {
                let (keyspace, key) = op.target();
                let current = self.get(keyspace, key).map(|d| d.revision);
                let holds = match expect {
                    Expect::Absent => current.is_none(),
                    Expect::Revision(rev) => current == Some(rev),
                };
                if !holds {
                    return Err(StoreError::Conflict {
                        keyspace,
                        key: key.to_owned(),
                    });
                }
            }
        }
        Ok(batch
            .ops
            .into_iter()
            .filter_map(|op| match op {
                Op::Put {
                    keyspace, key, body, ..
                } => Some(Write::Put {
                    keyspace,
                    key,
                    body,
                }),
                Op::Delete { keyspace, key, .. } => Some(Write::Delete { keyspace, key }),
                Op::Check { .. } => None,
            })
            .collect())
    }

    /// Applies already validated writes at `revision`.
    pub(crate) fn commit(&mut self, revision: u64, writes: Vec<Write>) {
        for write in writes {
            match write {
                Write::Put {
                    keyspace,
                    key,
                    body,
                } => {
                    self.docs.entry(keyspace).or_default().insert(
                        key,
                        Document {
                            revision,
                            body: Arc::new(body),
                        },
                    );
                }
                Write::Delete { keyspace, key } => {
                    if let Some(ks) = self.docs.get_mut(&keyspace) {
                        ks.remove(&key);
                    }
                }
            }
        }
        self.revision = self.revision.max(revision);
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = (Keyspace, &String, &Document)> {
        self.docs
            .iter()
            .flat_map(|(ks, docs)| docs.iter().map(move |(k, d)| (*ks, k, d)))
    }
}

#[derive(Debug, Default)]
pub struct MemoryStore {
    table: RwLock<Table>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl DocumentStore for MemoryStore {
    fn get(&self, keyspace: Keyspace, key: &str) -> Result<Option<Document>, StoreError> {
        let table = self.table.read().expect("store lock poisoned");
        Ok(table.get(keyspace, key).cloned())
    }

    fn scan(&self, keyspace: Keyspace, prefix: &str) -> Result<Vec<(String, Document)>, StoreError> {
        let table = self.table.read().expect("store lock poisoned");
        Ok(table.scan(keyspace, prefix))
    }

    fn revision(&self) -> Result<u64, StoreError> {
        Ok(self.table.read().expect("store lock poisoned").revision())
    }

    fn apply(&self, batch: Batch) -> Result<u64, StoreError> {
        let mut table = self.table.write().expect("store lock poisoned");
        let writes = table.prepare(batch)?;
        let revision = table.revision() + 1;
        table.commit(revision, writes);
        Ok(revision)
    }
}
