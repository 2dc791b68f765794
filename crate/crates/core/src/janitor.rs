//! Upload reconciliation.
//!
//! Every upload ticket leaves a waiting entry in the upload queue, written
//! in the same transaction as the ticket. Once the ticket expires, a sweep
//! checks storage: a present object commits the record, an absent one
//! (after a grace window) purges the pending record. Nothing here ever
//! deletes a committed record or an object that backs one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use tokio::task::JoinHandle;

use crate::catalogue::{Catalogue, FileRecord};
use crate::clock::SharedClock;
use crate::error::{Error, Result};
use crate::ids::{FileId, TicketId};
use crate::storage::{ObjectPath, Storage, StorageError, StorageTarget, StorageType, UploadTicket};
use crate::store::{Batch, Keyspace, Repository};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueueState {
    Waiting,
    Settled,
}

/// Upload-queue entry, keyed by file id: a pending record has at most one
/// outstanding ticket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub ticket_id: TicketId,
    pub file_id: FileId,
    pub expires_at: DateTime<Utc>,
    pub state: QueueState,
    #[serde(default)]
    pub settled_at: Option<DateTime<Utc>>,
}

pub(crate) fn stage_enqueue(batch: &mut Batch, ticket: &UploadTicket) -> QueueEntry {
    let entry = QueueEntry {
        ticket_id: ticket.ticket_id.clone(),
        file_id: ticket.file_id.clone(),
        expires_at: ticket.expires_at,
        state: QueueState::Waiting,
        settled_at: None,
    };
    batch.insert(Keyspace::UploadQueue, entry.file_id.as_str(), &entry);
    entry
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepReport {
    pub committed: usize,
    pub purged: usize,
    pub skipped: usize,
    /// Entries left waiting because storage could not be reached.
    pub deferred: usize,
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sweep: {} committed, {} purged, {} skipped, {} deferred",
            self.committed, self.purged, self.skipped, self.deferred
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlaggedRecord {
    pub file_id: FileId,
    pub storage_type: StorageType,
    pub bucket: String,
    pub storage_path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrphanObject {
    pub storage_type: StorageType,
    pub bucket: String,
    pub path: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconcileReport {
    /// Expired pending records without an object; removed.
    pub purged: Vec<FileId>,
    /// Committed records whose object is missing; left for an operator.
    pub flagged: Vec<FlaggedRecord>,
    /// Objects no record points at; left in place.
    pub orphans: Vec<OrphanObject>,
    /// Targets whose adapter is not configured in this process.
    pub unchecked_targets: Vec<String>,
}

impl ReconcileReport {
    pub fn is_clean(&self) -> bool {
        self.purged.is_empty() && self.flagged.is_empty() && self.orphans.is_empty()
    }
}

impl fmt::Display for ReconcileReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "reconcile: {} purged, {} flagged, {} orphans",
            self.purged.len(),
            self.flagged.len(),
            self.orphans.len()
        )?;
        if !self.unchecked_targets.is_empty() {
            write!(f, ", unchecked: {}", self.unchecked_targets.join(" "))?;
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct Janitor {
    repo: Repository,
    clock: SharedClock,
    catalogue: Catalogue,
    storage: Arc<Storage>,
    purge_grace: Duration,
    lease: Mutex<()>,
}

impl Janitor {
    /// `purge_grace` is added to a ticket's expiry before an absent object
    /// counts as abandoned.
    pub fn new(
        repo: Repository,
        clock: SharedClock,
        catalogue: Catalogue,
        storage: Arc<Storage>,
        purge_grace: Duration,
    ) -> Self {
        Self {
            repo,
            clock,
            catalogue,
            storage,
            purge_grace,
            lease: Mutex::new(()),
        }
    }

    pub fn purge_grace(&self) -> Duration {
        self.purge_grace
    }

    /// Persists a waiting entry for `ticket` on its own. Ticket issuance
    /// already does this atomically; a second entry for the same file is a
    /// conflict.
    pub fn enqueue(&self, ticket: &UploadTicket) -> Result<QueueEntry> {
        let mut batch = Batch::new();
        let entry = stage_enqueue(&mut batch, ticket);
        match self.repo.apply(batch) {
            Ok(_) => Ok(entry),
            Err(e) if e.is_conflict() => Err(Error::conflict(format!(
                "file {} already has a queued ticket",
                ticket.file_id
            ))),
            Err(e) => Err(e.into()),
        }
    }

    pub fn queue(&self) -> Result<Vec<QueueEntry>> {
        Ok(self
            .repo
            .scan::<QueueEntry>(Keyspace::UploadQueue, "")?
            .into_iter()
            .map(|s| s.value)
            .collect())
    }

    fn target_of(&self, record: &FileRecord) -> Result<StorageTarget> {
        let collection = self.catalogue.collection(&record.collection_id)?;
        self.storage.target(collection.storage_type, &collection.bucket)
    }

    /// Settles every waiting entry whose ticket has expired. Runs are
    /// serialized; concurrent eager commits are safe because every settle
    /// is a compare-and-swap.
    pub async fn sweep(&self) -> Result<SweepReport> {
        let _lease = self.lease.lock().await;
        let now = self.clock.now();
        let mut report = SweepReport::default();
        for entry in self.queue()? {
            if entry.state != QueueState::Waiting {
                continue;
            }
            if entry.expires_at > now {
                report.skipped += 1;
                continue;
            }
            let Some(record) = self.repo.get::<FileRecord>(Keyspace::Files, entry.file_id.as_str())? else {
                self.settle_orphan_entry(&entry.file_id)?;
                continue;
            };
            if record.value.is_committed() {
                self.settle_orphan_entry(&entry.file_id)?;
                continue;
            }
            let record = record.value;
            let target = self.target_of(&record)?;
            match self.storage.object_meta(&target, &record.storage_path).await {
                Err(e) => {
                    tracing::warn!(file_id = %record.id, error = %e, "sweep deferred entry");
                    report.deferred += 1;
                }
                Ok(Some(meta)) => {
                    if self.catalogue.commit_file(&record.id, meta.size, None)?.newly_committed {
                        report.committed += 1;
                    }
                }
                Ok(None) if now >= entry.expires_at + self.purge_grace => {
                    if self.catalogue.purge_pending(&record.id)?.is_some() {
                        report.purged += 1;
                    }
                }
                Ok(None) => report.skipped += 1,
            }
        }
        let pruned = self.storage.prune_grants(now)?;
        tracing::info!(%report, pruned_grants = pruned, "janitor sweep finished");
        Ok(report)
    }

    /// Marks a waiting entry settled when its record is already gone or
    /// committed by some other path.
    fn settle_orphan_entry(&self, file_id: &FileId) -> Result<()> {
        if let Some(s) = self.repo.get::<QueueEntry>(Keyspace::UploadQueue, file_id.as_str())? {
            if s.value.state == QueueState::Waiting {
                let mut entry = s.value;
                entry.state = QueueState::Settled;
                entry.settled_at = Some(self.clock.now());
                let mut batch = Batch::new();
                batch.put_if(
                    Keyspace::UploadQueue,
                    file_id.as_str(),
                    &entry,
                    crate::store::Expect::Revision(s.revision),
                );
                match self.repo.apply(batch) {
                    Ok(_) => {}
                    Err(e) if e.is_conflict() => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
        Ok(())
    }

    /// Cross-checks every record against storage. Plans first and mutates
    /// only if every reachable backend answered.
    pub async fn reconcile_full(&self) -> Result<ReconcileReport> {
        let _lease = self.lease.lock().await;
        let now = self.clock.now();
        let upload_ttl = self.storage.settings().upload_ttl;
        let queue: BTreeMap<FileId, QueueEntry> =
            self.queue()?.into_iter().map(|e| (e.file_id.clone(), e)).collect();

        let mut by_target: BTreeMap<(StorageType, String), Vec<FileRecord>> = BTreeMap::new();
        for stored in self.catalogue.all_records()? {
            let c = self.catalogue.collection(&stored.value.collection_id)?;
            by_target
                .entry((c.storage_type, c.bucket))
                .or_default()
                .push(stored.value);
        }
        for t in self.storage.list_targets()? {
            by_target.entry((t.storage_type, t.bucket)).or_default();
        }

        let mut report = ReconcileReport::default();
        let mut purge = Vec::new();
        for ((storage_type, bucket), records) in by_target {
            let target = self.storage.target(storage_type, &bucket)?;
            let backend = self.storage.backend_for(&target);
            let listed = match backend.list().await {
                Ok(l) => l,
                Err(StorageError::NotConfigured(_)) => {
                    report.unchecked_targets.push(format!("{storage_type}/{bucket}"));
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let present: BTreeSet<&str> = listed.iter().map(ObjectPath::as_str).collect();
            let mut referenced = BTreeSet::new();
            for r in &records {
                referenced.insert(r.storage_path.as_str());
                let has_object = present.contains(r.storage_path.as_str());
                if r.is_committed() {
                    if !has_object {
                        report.flagged.push(FlaggedRecord {
                            file_id: r.id.clone(),
                            storage_type,
                            bucket: bucket.clone(),
                            storage_path: r.storage_path.clone(),
                        });
                    }
                    continue;
                }
                let expires_at = queue
                    .get(&r.id)
                    .map(|e| e.expires_at)
                    .unwrap_or(r.requested_at + upload_ttl);
                if !has_object && now >= expires_at + self.purge_grace {
                    purge.push(r.id.clone());
                }
            }
            for path in &listed {
                if !referenced.contains(path.as_str()) {
                    report.orphans.push(OrphanObject {
                        storage_type,
                        bucket: bucket.clone(),
                        path: path.to_string(),
                    });
                }
            }
        }

        for id in purge {
            if self.catalogue.purge_pending(&id)?.is_some() {
                report.purged.push(id);
            }
        }
        tracing::info!(%report, "janitor reconcile finished");
        Ok(report)
    }

    /// Runs [`Janitor::sweep`] every `every` until the handle is aborted.
    pub fn spawn_interval(self: Arc<Self>, every: std::time::Duration) -> JoinHandle<()> {
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(every);
            tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            loop {
                tick.tick().await;
                if let Err(e) = self.sweep().await {
                    tracing::error!(error = %e, "janitor sweep failed");
                }
            }
        })
    }
}
