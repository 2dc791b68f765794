//! Data-agnostic storage layer.
//!
//! Storage targets (a backend type plus a bucket) are registered once and
//! then addressed through the [`ObjectBackend`] contract. Clients never send
//! object bytes through the metadata API: they receive expiring direct URLs
//! instead. For the local backend those URLs point at the gateway's raw
//! endpoints, keyed by an opaque ticket or grant id.

mod backend;
mod local;
mod remote;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use bytes::Bytes;
use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use url::Url;

pub use backend::{
    DirectTransfer, ObjectBackend, ObjectMeta, ObjectPath, StorageError, TransferKind,
};
pub use local::LocalBackend;
pub use remote::UnconfiguredBackend;

use crate::catalogue::{validate_bucket, Collection, FileRecord};
use crate::clock::SharedClock;
use crate::error::{Error, Result};
use crate::ids::{CredentialId, FileId, GrantId, TicketId};
use crate::janitor;
use crate::store::{Batch, Expect, Keyspace, Repository};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StorageType {
    #[serde(rename = "local")]
    Local,
    #[serde(rename = "s3-compatible")]
    S3Compatible,
    #[serde(rename = "gcs-compatible")]
    GcsCompatible,
    #[serde(rename = "hdfs-compatible")]
    HdfsCompatible,
}

impl StorageType {
    pub const ALL: [StorageType; 4] = [
        StorageType::Local,
        StorageType::S3Compatible,
        StorageType::GcsCompatible,
        StorageType::HdfsCompatible,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StorageType::Local => "local",
            StorageType::S3Compatible => "s3-compatible",
            StorageType::GcsCompatible => "gcs-compatible",
            StorageType::HdfsCompatible => "hdfs-compatible",
        }
    }

    pub fn needs_credential(self) -> bool {
        self != StorageType::Local
    }
}

impl FromStr for StorageType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        StorageType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| {
                format!(
                    "unknown storage type `{s}` (expected one of {})",
                    StorageType::ALL.map(StorageType::as_str).join(", ")
                )
            })
    }
}

impl fmt::Display for StorageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A physical storage location registered with the platform.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageTarget {
    pub storage_type: StorageType,
    pub bucket: String,
    pub credential_id: Option<CredentialId>,
    /// Root directory (local) or endpoint (remote). Server-side detail,
    /// never returned by the API.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    pub registered_at: DateTime<Utc>,
}

impl StorageTarget {
    pub fn local(bucket: impl Into<String>, registered_at: DateTime<Utc>) -> Self {
        Self {
            storage_type: StorageType::Local,
            bucket: bucket.into(),
            credential_id: None,
            location: None,
            registered_at,
        }
    }

    pub fn info(&self) -> TargetInfo {
        TargetInfo {
            storage_type: self.storage_type,
            bucket: self.bucket.clone(),
            credential_id: self.credential_id.clone(),
            registered_at: self.registered_at,
        }
    }

    fn key(storage_type: StorageType, bucket: &str) -> String {
        format!("{}/{bucket}", storage_type.as_str())
    }
}

/// Public view of a target: no server-side location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetInfo {
    pub storage_type: StorageType,
    pub bucket: String,
    pub credential_id: Option<CredentialId>,
    pub registered_at: DateTime<Utc>,
}

/// Expiring authorization to write one object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UploadTicket {
    pub ticket_id: TicketId,
    pub file_id: FileId,
    pub version: u32,
    pub storage_type: StorageType,
    pub bucket: String,
    pub storage_path: String,
    pub upload_url: String,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

/// Expiring authorization to read one object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DownloadGrant {
    pub grant_id: GrantId,
    pub file_id: FileId,
    pub storage_type: StorageType,
    pub bucket: String,
    pub storage_path: String,
    pub download_url: String,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

/// Result of a successful direct upload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UploadReceipt {
    pub file_id: FileId,
    pub storage_path: String,
    pub size_bytes: u64,
}

#[derive(Debug, Clone)]
pub struct TransferSettings {
    pub upload_ttl: Duration,
    pub download_ttl: Duration,
    /// Public base URL of the gateway, with a trailing slash.
    pub gateway_url: Url,
    /// Parent directory for local buckets registered without an explicit root.
    pub objects_root: PathBuf,
}

impl TransferSettings {
    pub const DEFAULT_TTL_MINUTES: i64 = 15;

    pub fn new(gateway_url: Url, objects_root: impl Into<PathBuf>) -> Self {
        Self {
            upload_ttl: Duration::minutes(Self::DEFAULT_TTL_MINUTES),
            download_ttl: Duration::minutes(Self::DEFAULT_TTL_MINUTES),
            gateway_url: normalize_base(gateway_url),
            objects_root: objects_root.into(),
        }
    }
}

pub(crate) fn normalize_base(mut url: Url) -> Url {
    if !url.path().ends_with('/') {
        let path = format!("{}/", url.path());
        url.set_path(&path);
    }
    url
}

#[derive(Debug)]
pub struct Storage {
    repo: Repository,
    clock: SharedClock,
    settings: TransferSettings,
    backends: RwLock<HashMap<String, Arc<dyn ObjectBackend>>>,
}

impl Storage {
    pub fn new(repo: Repository, clock: SharedClock, settings: TransferSettings) -> Self {
        Self {
            repo,
            clock,
            settings,
            backends: RwLock::new(HashMap::new()),
        }
    }

    pub fn settings(&self) -> &TransferSettings {
        &self.settings
    }

    /// Registers a target. Remote types must reference a vault credential;
    /// the caller is responsible for checking that it exists.
    pub fn register_target(
        &self,
        storage_type: StorageType,
        bucket: &str,
        credential_id: Option<CredentialId>,
        location: Option<String>,
    ) -> Result<StorageTarget> {
        validate_bucket(bucket)?;
        if storage_type.needs_credential() && credential_id.is_none() {
            return Err(Error::invalid(
                "credential_id",
                format!("{storage_type} targets require a stored credential"),
            ));
        }
        let target = StorageTarget {
            storage_type,
            bucket: bucket.to_owned(),
            credential_id,
            location,
            registered_at: self.clock.now(),
        };
        let mut batch = Batch::new();
        batch.insert(
            Keyspace::Targets,
            StorageTarget::key(storage_type, bucket),
            &target,
        );
        match self.repo.apply(batch) {
            Ok(_) => Ok(target),
            Err(e) if e.is_conflict() => Err(Error::conflict(format!(
                "target {storage_type}/{bucket} already registered"
            ))),
            Err(e) => Err(e.into()),
        }
    }

    pub fn list_targets(&self) -> Result<Vec<StorageTarget>> {
        Ok(self
            .repo
            .scan::<StorageTarget>(Keyspace::Targets, "")?
            .into_iter()
            .map(|s| s.value)
            .collect())
    }

    pub fn target(&self, storage_type: StorageType, bucket: &str) -> Result<StorageTarget> {
        self.repo
            .get::<StorageTarget>(Keyspace::Targets, &StorageTarget::key(storage_type, bucket))?
            .map(|s| s.value)
            .ok_or_else(|| Error::not_found(format!("storage target {storage_type}/{bucket}")))
    }

    /// Routes a target to a specific adapter instead of the default one.
    pub fn attach_backend(
        &self,
        storage_type: StorageType,
        bucket: &str,
        backend: Arc<dyn ObjectBackend>,
    ) {
        self.backends
            .write()
            .expect("backend registry poisoned")
            .insert(StorageTarget::key(storage_type, bucket), backend);
    }

    pub fn backend_for(&self, target: &StorageTarget) -> Arc<dyn ObjectBackend> {
        let key = StorageTarget::key(target.storage_type, &target.bucket);
        if let Some(b) = self.backends.read().expect("backend registry poisoned").get(&key) {
            return Arc::clone(b);
        }
        let backend: Arc<dyn ObjectBackend> = match target.storage_type {
            StorageType::Local => {
                let root = target
                    .location
                    .as_ref()
                    .map(PathBuf::from)
                    .unwrap_or_else(|| self.settings.objects_root.join(&target.bucket));
                Arc::new(LocalBackend::new(root))
            }
            other => Arc::new(UnconfiguredBackend::new(other)),
        };
        Arc::clone(
            self.backends
                .write()
                .expect("backend registry poisoned")
                .entry(key)
                .or_insert(backend),
        )
    }

    pub fn backend(&self, storage_type: StorageType, bucket: &str) -> Result<Arc<dyn ObjectBackend>> {
        let target = self.target(storage_type, bucket)?;
        Ok(self.backend_for(&target))
    }

    /// Issues a direct-upload ticket for a pending record and enqueues it
    /// for reconciliation in the same write.
    pub fn issue_upload_ticket(&self, record: &FileRecord, collection: &Collection) -> Result<UploadTicket> {
        let stored = self
            .repo
            .get::<FileRecord>(Keyspace::Files, record.id.as_str())?
            .ok_or_else(|| Error::not_found(format!("file {}", record.id)))?;
        if stored.value.is_committed() {
            return Err(Error::conflict(format!("file {} is already committed", record.id)));
        }
        let backend = self.backend(collection.storage_type, &collection.bucket)?;
        let path = ObjectPath::parse(stored.value.storage_path.clone())?;
        let issued_at = self.clock.now();
        let expires_at = issued_at + self.settings.upload_ttl;
        let ticket_id = TicketId::generate();
        let url = backend.direct_url(
            &DirectTransfer {
                kind: TransferKind::Upload,
                capability: ticket_id.as_str(),
                path: &path,
                expires_at,
            },
            &self.settings.gateway_url,
        )?;
        let ticket = UploadTicket {
            ticket_id,
            file_id: record.id.clone(),
            version: stored.value.version,
            storage_type: collection.storage_type,
            bucket: collection.bucket.clone(),
            storage_path: stored.value.storage_path.clone(),
            upload_url: url.to_string(),
            issued_at,
            expires_at,
        };
        let mut batch = Batch::new();
        batch
            .check(Keyspace::Files, record.id.as_str(), Expect::Revision(stored.revision))
            .insert(Keyspace::Tickets, ticket.ticket_id.as_str(), &ticket);
        janitor::stage_enqueue(&mut batch, &ticket);
        match self.repo.apply(batch) {
            Ok(_) => Ok(ticket),
            Err(e) if e.is_conflict() => Err(Error::conflict(format!(
                "an upload ticket was already issued for file {}",
                record.id
            ))),
            Err(e) => Err(e.into()),
        }
    }

    /// Issues an expiring download URL for a committed record.
    pub fn issue_download_grant(&self, record: &FileRecord, collection: &Collection) -> Result<DownloadGrant> {
        if !record.is_committed() {
            return Err(Error::not_found(format!("file {}", record.id)));
        }
        let backend = self.backend(collection.storage_type, &collection.bucket)?;
        let path = ObjectPath::parse(record.storage_path.clone())?;
        let issued_at = self.clock.now();
        let expires_at = issued_at + self.settings.download_ttl;
        let grant_id = GrantId::generate();
        let url = backend.direct_url(
            &DirectTransfer {
                kind: TransferKind::Download,
                capability: grant_id.as_str(),
                path: &path,
                expires_at,
            },
            &self.settings.gateway_url,
        )?;
        let grant = DownloadGrant {
            grant_id,
            file_id: record.id.clone(),
            storage_type: collection.storage_type,
            bucket: collection.bucket.clone(),
            storage_path: record.storage_path.clone(),
            download_url: url.to_string(),
            issued_at,
            expires_at,
        };
        let mut batch = Batch::new();
        batch.insert(Keyspace::DownloadGrants, grant.grant_id.as_str(), &grant);
        self.repo.apply(batch)?;
        Ok(grant)
    }

    /// Writes `body` to the single path a ticket authorizes.
    pub async fn redeem_upload(&self, ticket_id: &TicketId, body: Bytes) -> Result<UploadReceipt> {
        let ticket = self
            .repo
            .get::<UploadTicket>(Keyspace::Tickets, ticket_id.as_str())?
            .ok_or_else(|| Error::not_found("upload ticket"))?
            .value;
        if self.clock.now() >= ticket.expires_at {
            return Err(Error::forbidden("upload ticket expired"));
        }
        let record = self
            .repo
            .get::<FileRecord>(Keyspace::Files, ticket.file_id.as_str())?
            .ok_or_else(|| Error::not_found(format!("file {}", ticket.file_id)))?
            .value;
        if record.is_committed() {
            return Err(Error::conflict(format!("file {} is already committed", record.id)));
        }
        let path = ObjectPath::parse(ticket.storage_path.clone())?;
        let backend = self.backend(ticket.storage_type, &ticket.bucket)?;
        let size_bytes = backend.put(&path, body).await?;
        Ok(UploadReceipt {
            file_id: ticket.file_id,
            storage_path: ticket.storage_path,
            size_bytes,
        })
    }

    pub async fn redeem_download(&self, grant_id: &GrantId) -> Result<Bytes> {
        let grant = self
            .repo
            .get::<DownloadGrant>(Keyspace::DownloadGrants, grant_id.as_str())?
            .ok_or_else(|| Error::not_found("download grant"))?
            .value;
        if self.clock.now() >= grant.expires_at {
            return Err(Error::forbidden("download grant expired"));
        }
        let path = ObjectPath::parse(grant.storage_path.clone())?;
        let backend = self.backend(grant.storage_type, &grant.bucket)?;
        backend
            .get(&path)
            .await?
            .ok_or_else(|| Error::not_found(format!("object {path}")))
    }

    pub async fn object_meta(&self, target: &StorageTarget, path: &str) -> Result<Option<ObjectMeta>> {
        let path = ObjectPath::parse(path)?;
        Ok(self.backend_for(target).head(&path).await?)
    }

    pub async fn object_exists(&self, target: &StorageTarget, path: &str) -> Result<bool> {
        Ok(self.object_meta(target, path).await?.is_some())
    }

    pub async fn delete_object(&self, target: &StorageTarget, path: &str) -> Result<()> {
        let path = ObjectPath::parse(path)?;
        Ok(self.backend_for(target).delete(&path).await?)
    }

    /// Deletes expired download grants; returns how many were removed.
    pub(crate) fn prune_grants(&self, now: DateTime<Utc>) -> Result<usize> {
        let mut pruned = 0;
        for g in self.repo.scan::<DownloadGrant>(Keyspace::DownloadGrants, "")? {
            if g.value.expires_at <= now {
                let mut batch = Batch::new();
                batch.delete_if(Keyspace::DownloadGrants, g.key, g.revision);
                if self.repo.apply(batch).is_ok() {
                    pruned += 1;
                }
            }
        }
        Ok(pruned)
    }
}
