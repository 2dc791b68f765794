//! The data catalogue: collection index, file index, version resolution
//! and search.
//!
//! File records move through `pending -> committed`; pending records are
//! invisible to every listing and search. Committed records are never
//! mutated or removed, and only pending records may be purged.

mod lineage;
mod model;
mod page;
mod query;

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde_json::Value;

pub use model::{
    storage_path, validate_bucket, validate_collection_name, validate_file_name, Collection,
    DedupKey, FileCategory, FileRecord, FileStatus, VersionOrigin,
};
pub use page::{Listing, Page, DEFAULT_LIMIT, MAX_LIMIT};
pub use query::{FileQuery, FileQueryBuilder, Predicate, QueryField};

use crate::clock::SharedClock;
use crate::error::{Error, Result};
use crate::governance::VisaBroker;
use crate::ids::{CollectionId, FileId, UserId};
use crate::janitor::{QueueEntry, QueueState};
use crate::storage::StorageTarget;
use crate::store::{Batch, Expect, Keyspace, Repository, Stored};
use lineage::{choose_version, lineage_key, Lineage};

/// Version and object path a registration would receive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedVersion {
    pub version: u32,
    pub origin: VersionOrigin,
    pub storage_path: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommitOutcome {
    pub record: FileRecord,
    /// False when the record was already committed before this call.
    pub newly_committed: bool,
}

/// What [`Catalogue::browse`] lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BrowseScope {
    Collections,
    FilesOf(CollectionId),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BrowseListing {
    Collections(Listing<Collection>),
    Files(Listing<FileRecord>),
}

fn collection_name_key(c: &Collection) -> String {
    format!("{}/{}/{}", c.storage_type.as_str(), c.bucket, c.name)
}

fn listing_order(a: &FileRecord, b: &FileRecord) -> std::cmp::Ordering {
    (&a.file_name, &a.collection_id, a.file_category, a.version, &a.id).cmp(&(
        &b.file_name,
        &b.collection_id,
        b.file_category,
        b.version,
        &b.id,
    ))
}

fn is_committed_doc(doc: &Value) -> bool {
    doc.get("status").and_then(Value::as_str) == Some(FileStatus::Committed.as_str())
}

#[derive(Debug, Clone)]
pub struct Catalogue {
    repo: Repository,
    clock: SharedClock,
    committed: Arc<RwLock<Snapshot>>,
}

#[derive(Debug)]
struct Indexed {
    doc_revision: u64,
    record: FileRecord,
    folded_name: String,
}

/// Decoded committed records in listing order, valid for one store revision.
#[derive(Debug, Default)]
struct Snapshot {
    revision: Option<u64>,
    by_key: HashMap<String, Arc<Indexed>>,
    ordered: Arc<Vec<Arc<Indexed>>>,
}

impl Catalogue {
    pub fn new(repo: Repository, clock: SharedClock) -> Self {
        Self { repo, clock, committed: Arc::default() }
    }

    /// Creates a collection on `target` and issues its visa in the same
    /// atomic write.
    pub fn create_collection(
        &self,
        name: &str,
        target: &StorageTarget,
        owner: &UserId,
        visas: &VisaBroker,
    ) -> Result<Collection> {
        validate_collection_name(name)?;
        let now = self.clock.now();
        let id = CollectionId::generate();
        let mut batch = Batch::new();
        let visa = visas.stage_issue(&mut batch, &id, owner);
        let collection = Collection {
            id: id.clone(),
            name: name.to_owned(),
            storage_type: target.storage_type,
            bucket: target.bucket.clone(),
            owner_id: owner.clone(),
            visa_id: visa.visa_id,
            created_at: now,
        };
        batch
            .insert(Keyspace::CollectionNames, collection_name_key(&collection), &id)
            .insert(Keyspace::Collections, id.as_str(), &collection);
        match self.repo.apply(batch) {
            Ok(_) => Ok(collection),
            Err(e) if e.is_conflict() => Err(Error::conflict(format!(
                "collection `{name}` already exists on {}/{}",
                target.storage_type, target.bucket
            ))),
            Err(e) => Err(e.into()),
        }
    }

    pub fn collection(&self, id: &CollectionId) -> Result<Collection> {
        self.repo
            .get::<Collection>(Keyspace::Collections, id.as_str())?
            .map(|s| s.value)
            .ok_or_else(|| Error::not_found(format!("collection {id}")))
    }

    /// Every collection, regardless of the caller's visas: metadata is
    /// discoverable so that access can be requested.
    pub fn list_collections(&self, page: Option<Page>) -> Result<Listing<Collection>> {
        let mut all: Vec<Collection> = self
            .repo
            .scan::<Collection>(Keyspace::Collections, "")?
            .into_iter()
            .map(|s| s.value)
            .collect();
        all.sort_by(|a, b| {
            (&a.name, a.storage_type, &a.bucket, &a.id).cmp(&(&b.name, b.storage_type, &b.bucket, &b.id))
        });
        Ok(Listing::paginate(all, page))
    }

    /// Committed files of one collection.
    pub fn list_files(&self, collection_id: &CollectionId, page: Option<Page>) -> Result<Listing<FileRecord>> {
        self.collection(collection_id)?;
        self.committed_where(page, |i| i.record.collection_id == *collection_id)
    }

    pub fn browse(&self, scope: &BrowseScope, page: Option<Page>) -> Result<BrowseListing> {
        match scope {
            BrowseScope::Collections => self.list_collections(page).map(BrowseListing::Collections),
            BrowseScope::FilesOf(id) => self.list_files(id, page).map(BrowseListing::Files),
        }
    }

    /// Version a registration of `key` would get right now. Read-only; the
    /// assignment itself happens atomically in [`Catalogue::register_file`].
    pub fn resolve_version(&self, key: &DedupKey, requested: Option<u32>) -> Result<ResolvedVersion> {
        key.validate()?;
        let collection = self.collection(&key.collection_id)?;
        let lineage = self
            .repo
            .get::<Lineage>(Keyspace::Lineages, &lineage_key(key))?
            .map(|s| s.value.versions)
            .unwrap_or_default();
        let (version, origin) = choose_version(&lineage, requested)?;
        Ok(ResolvedVersion {
            version,
            origin,
            storage_path: storage_path(&collection.name, version, &key.file_name),
        })
    }

    /// Persists a pending record holding a freshly assigned version.
    ///
    /// Authorization is the caller's job; this only enforces catalogue
    /// invariants.
    pub fn register_file(
        &self,
        key: &DedupKey,
        uploader: &UserId,
        requested: Option<u32>,
    ) -> Result<FileRecord> {
        key.validate()?;
        let collection = self.collection(&key.collection_id)?;
        if key.bucket != collection.bucket {
            return Err(Error::invalid(
                "bucket",
                format!("collection is stored in bucket `{}`", collection.bucket),
            ));
        }
        let lkey = lineage_key(key);
        loop {
            let current = self.repo.get::<Lineage>(Keyspace::Lineages, &lkey)?;
            let (expect, mut lineage) = match current {
                Some(s) => (Expect::Revision(s.revision), s.value),
                None => (Expect::Absent, Lineage::empty(key.clone())),
            };
            let (version, origin) = choose_version(&lineage.versions, requested)?;
            let record = FileRecord {
                id: FileId::generate(),
                collection_id: collection.id.clone(),
                file_name: key.file_name.clone(),
                file_category: key.file_category,
                bucket: collection.bucket.clone(),
                version,
                version_origin: origin,
                storage_path: storage_path(&collection.name, version, &key.file_name),
                status: FileStatus::Pending,
                size_bytes: None,
                checksum: None,
                uploaded_by: uploader.clone(),
                requested_at: self.clock.now(),
                committed_at: None,
            };
            lineage.versions.insert(version, record.id.clone());
            let mut batch = Batch::new();
            batch
                .put_if(Keyspace::Lineages, lkey.as_str(), &lineage, expect)
                .insert(Keyspace::Files, record.id.as_str(), &record);
            match self.repo.apply(batch) {
                Ok(_) => return Ok(record),
                Err(e) if e.is_conflict() => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }

    pub fn file(&self, id: &FileId) -> Result<FileRecord> {
        self.stored_file(id).map(|s| s.value)
    }

    pub(crate) fn stored_file(&self, id: &FileId) -> Result<Stored<FileRecord>> {
        self.repo
            .get::<FileRecord>(Keyspace::Files, id.as_str())?
            .ok_or_else(|| Error::not_found(format!("file {id}")))
    }

    /// Marks a pending record committed and settles its upload-queue entry
    /// in the same write. The caller must already have confirmed the object
    /// exists in storage. Committing twice returns the committed record.
    pub fn commit_file(
        &self,
        id: &FileId,
        size_bytes: u64,
        checksum: Option<String>,
    ) -> Result<CommitOutcome> {
        loop {
            let stored = self.stored_file(id)?;
            if stored.value.is_committed() {
                return Ok(CommitOutcome {
                    record: stored.value,
                    newly_committed: false,
                });
            }
            let now = self.clock.now();
            let mut record = stored.value;
            record.status = FileStatus::Committed;
            record.size_bytes = Some(size_bytes);
            record.checksum = checksum.clone();
            record.committed_at = Some(now);
            let mut batch = Batch::new();
            batch.put_if(
                Keyspace::Files,
                id.as_str(),
                &record,
                Expect::Revision(stored.revision),
            );
            self.stage_settle(&mut batch, id, now)?;
            match self.repo.apply(batch) {
                Ok(_) => {
                    return Ok(CommitOutcome {
                        record,
                        newly_committed: true,
                    })
                }
                Err(e) if e.is_conflict() => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Removes a pending record, frees its version and settles its queue
    /// entry. Committed or missing records are left alone and yield `None`.
    pub fn purge_pending(&self, id: &FileId) -> Result<Option<FileRecord>> {
        loop {
            let Some(stored) = self.repo.get::<FileRecord>(Keyspace::Files, id.as_str())? else {
                return Ok(None);
            };
            if stored.value.is_committed() {
                return Ok(None);
            }
            let record = stored.value;
            let lkey = lineage_key(&record.dedup_key());
            let mut batch = Batch::new();
            batch.delete_if(Keyspace::Files, id.as_str(), stored.revision);
            if let Some(lin) = self.repo.get::<Lineage>(Keyspace::Lineages, &lkey)? {
                let mut lineage = lin.value;
                if lineage.versions.get(&record.version) == Some(&record.id) {
                    lineage.versions.remove(&record.version);
                    if lineage.versions.is_empty() {
                        batch.delete_if(Keyspace::Lineages, lkey.as_str(), lin.revision);
                    } else {
                        batch.put_if(
                            Keyspace::Lineages,
                            lkey.as_str(),
                            &lineage,
                            Expect::Revision(lin.revision),
                        );
                    }
                }
            }
            self.stage_settle(&mut batch, id, self.clock.now())?;
            match self.repo.apply(batch) {
                Ok(_) => return Ok(Some(record)),
                Err(e) if e.is_conflict() => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }

    fn stage_settle(&self, batch: &mut Batch, id: &FileId, now: chrono::DateTime<chrono::Utc>) -> Result<()> {
        if let Some(entry) = self.repo.get::<QueueEntry>(Keyspace::UploadQueue, id.as_str())? {
            if entry.value.state == QueueState::Waiting {
                let mut settled = entry.value;
                settled.state = QueueState::Settled;
                settled.settled_at = Some(now);
                batch.put_if(
                    Keyspace::UploadQueue,
                    id.as_str(),
                    &settled,
                    Expect::Revision(entry.revision),
                );
            }
        }
        Ok(())
    }

    /// Committed records whose name contains `keyword`, ignoring case.
    pub fn basic_search(&self, keyword: &str, page: Option<Page>) -> Result<Listing<FileRecord>> {
        let keyword = keyword.trim();
        if keyword.is_empty() {
            return Err(Error::invalid("keyword", "must not be empty"));
        }
        let needle = keyword.to_lowercase();
        self.committed_where(page, |i| i.folded_name.contains(&needle))
    }

    /// Committed records satisfying every predicate of `query`.
    pub fn advanced_search(&self, query: &FileQuery) -> Result<Listing<FileRecord>> {
        self.committed_where(query.page, |i| query.matches(&i.record))
    }

    fn committed_where(
        &self,
        page: Option<Page>,
        pred: impl Fn(&Indexed) -> bool,
    ) -> Result<Listing<FileRecord>> {
        let all = self.committed_snapshot()?;
        let hits: Vec<&Arc<Indexed>> = all.iter().filter(|i| pred(i)).collect();
        let page = Listing::paginate(hits, page);
        Ok(Listing {
            items: page.items.into_iter().map(|i| i.record.clone()).collect(),
            total: page.total,
            offset: page.offset,
            limit: page.limit,
        })
    }

    // Committed records only change when the store does, so decoding is
    // redone per store revision and only for documents that moved.
    fn committed_snapshot(&self) -> Result<Arc<Vec<Arc<Indexed>>>> {
        // Read the revision first: a write racing the scan just forces
        // another rebuild next time.
        let revision = self.repo.revision()?;
        {
            let snap = self.committed.read().expect("catalogue snapshot poisoned");
            if snap.revision == Some(revision) {
                return Ok(Arc::clone(&snap.ordered));
            }
        }
        let mut snap = self.committed.write().expect("catalogue snapshot poisoned");
        if snap.revision == Some(revision) {
            return Ok(Arc::clone(&snap.ordered));
        }
        let mut by_key = HashMap::with_capacity(snap.by_key.len());
        for (key, doc) in self.repo.scan_raw(Keyspace::Files)? {
            if !is_committed_doc(&doc.body) {
                continue;
            }
            let entry = match snap.by_key.get(&key) {
                Some(known) if known.doc_revision == doc.revision => Arc::clone(known),
                _ => {
                    let doc_revision = doc.revision;
                    let record = crate::store::decode::<FileRecord>(Keyspace::Files, key.clone(), doc)?.value;
                    let folded_name = record.file_name.to_lowercase();
                    Arc::new(Indexed { doc_revision, record, folded_name })
                }
            };
            by_key.insert(key, entry);
        }
        let mut ordered: Vec<Arc<Indexed>> = by_key.values().cloned().collect();
        ordered.sort_by(|a, b| listing_order(&a.record, &b.record));
        let ordered = Arc::new(ordered);
        *snap = Snapshot { revision: Some(revision), by_key, ordered: Arc::clone(&ordered) };
        Ok(ordered)
    }

    /// Every record, pending or committed, with its revision.
    pub(crate) fn all_records(&self) -> Result<Vec<Stored<FileRecord>>> {
        Ok(self.repo.scan(Keyspace::Files, "")?)
    }
}
