//! Service facades. Each HTTP route calls exactly one facade method; the
//! facades own authorization and orchestrate the domain modules.

use std::sync::Arc;

use bytes::Bytes;
use chrono::Duration;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalogue::{
    Catalogue, Collection, DedupKey, FileCategory, FileQuery, FileRecord, Listing, Page,
};
use crate::clock::SharedClock;
use crate::config::{Config, StoreKind};
use crate::error::{Error, Result};
use crate::governance::{
    AccessRequest, AccessRequests, AuthToken, CredentialInfo, CredentialVault, Decision,
    GrantAction, NewUser, Password, Principal, ResetToken, SecretBytes, SecretKey,
    UserDirectory, UserProfile, UserSettings, UserUpdate, Visa, VisaBroker,
};
use crate::ids::{CollectionId, CredentialId, FileId, GrantId, RequestId, TicketId, UserId, VisaId};
use crate::janitor::{Janitor, ReconcileReport, SweepReport};
use crate::storage::{
    DownloadGrant, Storage, StorageType, TargetInfo, TransferSettings, UploadReceipt, UploadTicket,
};
use crate::store::{FileStore, Repository};

#[derive(Debug, Clone)]
pub struct ServiceSettings {
    pub users: UserSettings,
    pub transfer: TransferSettings,
    pub purge_grace: Duration,
}

/// The assembled platform: one document store shared by every module.
#[derive(Debug)]
pub struct Lakehouse {
    repo: Repository,
    clock: SharedClock,
    users: UserDirectory,
    broker: VisaBroker,
    requests: AccessRequests,
    vault: CredentialVault,
    catalogue: Catalogue,
    storage: Arc<Storage>,
    janitor: Arc<Janitor>,
}

impl Lakehouse {
    pub fn new(repo: Repository, clock: SharedClock, key: SecretKey, settings: ServiceSettings) -> Self {
        let catalogue = Catalogue::new(repo.clone(), clock.clone());
        let storage = Arc::new(Storage::new(repo.clone(), clock.clone(), settings.transfer));
        let janitor = Arc::new(Janitor::new(
            repo.clone(),
            clock.clone(),
            catalogue.clone(),
            storage.clone(),
            settings.purge_grace,
        ));
        Self {
            users: UserDirectory::new(repo.clone(), clock.clone(), settings.users),
            broker: VisaBroker::new(repo.clone(), clock.clone()),
            requests: AccessRequests::new(repo.clone(), clock.clone()),
            vault: CredentialVault::new(repo.clone(), clock.clone(), key),
            catalogue,
            storage,
            janitor,
            repo,
            clock,
        }
    }

    /// Opens the configured store and registers configured targets that
    /// are not registered yet.
    pub fn open(config: &Config, key: SecretKey, clock: SharedClock) -> Result<Self> {
        config.validate()?;
        let repo = match config.store {
            StoreKind::Memory => Repository::in_memory(),
            StoreKind::File => {
                let store = FileStore::open_with(config.data_dir.join("catalogue"), config.fsync)
                    .map_err(|e| Error::Config(format!("opening store: {e}")))?;
                Repository::new(Arc::new(store))
            }
        };
        let settings = ServiceSettings {
            users: config.user_settings(),
            transfer: config.transfer_settings(),
            purge_grace: config.purge_grace(),
        };
        let lake = Self::new(repo, clock, key, settings);
        for t in &config.targets {
            match lake.storage.register_target(
                t.storage_type,
                &t.bucket,
                t.credential_id.clone(),
                t.location.clone(),
            ) {
                Ok(_) | Err(Error::Conflict(_)) => {}
                Err(e) => return Err(Error::Config(format!("target {}/{}: {e}", t.storage_type, t.bucket))),
            }
        }
        Ok(lake)
    }

    pub fn repo(&self) -> &Repository {
        &self.repo
    }

    pub fn clock(&self) -> &SharedClock {
        &self.clock
    }

    pub fn catalogue(&self) -> &Catalogue {
        &self.catalogue
    }

    pub fn storage(&self) -> &Arc<Storage> {
        &self.storage
    }

    pub fn janitor(&self) -> &Arc<Janitor> {
        &self.janitor
    }

    pub fn directory(&self) -> &UserDirectory {
        &self.users
    }

    pub fn broker(&self) -> &VisaBroker {
        &self.broker
    }

    pub fn vault(&self) -> &CredentialVault {
        &self.vault
    }

    pub fn users(&self) -> UserService<'_> {
        UserService(self)
    }

    pub fn visas(&self) -> VisaService<'_> {
        VisaService(self)
    }

    pub fn catalog(&self) -> CatalogService<'_> {
        CatalogService(self)
    }

    pub fn files(&self) -> FileService<'_> {
        FileService(self)
    }

    pub fn credentials(&self) -> CredentialService<'_> {
        CredentialService(self)
    }

    pub async fn sweep(&self, actor: &Principal) -> Result<SweepReport> {
        actor.require_data_manager("running the janitor")?;
        self.janitor.sweep().await
    }

    pub async fn reconcile(&self, actor: &Principal) -> Result<ReconcileReport> {
        actor.require_data_manager("running the janitor")?;
        self.janitor.reconcile_full().await
    }
}

/// Either half of the password-reset flow.
#[derive(Debug, Clone)]
pub enum PasswordReset {
    /// A data-manager asks for a one-time token.
    Issue,
    /// Anyone holding the token sets a new password.
    Complete { reset_token: String, new_password: Password },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResetOutcome {
    Issued(ResetToken),
    Completed { user_id: UserId, password_reset: bool },
}

pub struct UserService<'a>(&'a Lakehouse);

impl UserService<'_> {
    pub fn login(&self, login_or_email: &str, password: &Password) -> Result<AuthToken> {
        self.0.users.login(login_or_email, password)
    }

    pub fn authenticate(&self, token: &str) -> Result<Principal> {
        self.0.users.authenticate(token)
    }

    pub fn create(&self, actor: Option<&Principal>, new: NewUser) -> Result<UserProfile> {
        self.0.users.create(actor, new)
    }

    pub fn update(&self, actor: &Principal, id: &UserId, update: UserUpdate) -> Result<UserProfile> {
        self.0.users.update(actor, id, update)
    }

    pub fn delete(&self, actor: &Principal, id: &UserId) -> Result<()> {
        self.0.users.delete(actor, id)
    }

    pub fn password_reset(
        &self,
        actor: Option<&Principal>,
        id: &UserId,
        step: PasswordReset,
    ) -> Result<ResetOutcome> {
        match step {
            PasswordReset::Issue => {
                let actor = actor.ok_or(Error::Authentication)?;
                self.0.users.issue_reset(actor, id).map(ResetOutcome::Issued)
            }
            PasswordReset::Complete {
                reset_token,
                new_password,
            } => {
                self.0.users.complete_reset(id, &reset_token, &new_password)?;
                Ok(ResetOutcome::Completed {
                    user_id: id.clone(),
                    password_reset: true,
                })
            }
        }
    }
}

pub struct VisaService<'a>(&'a Lakehouse);

impl VisaService<'_> {
    pub fn grant(&self, actor: &Principal, visa: &VisaId, user: &UserId) -> Result<Visa> {
        self.0.broker.set_grant(visa, user, GrantAction::Grant, actor)
    }

    pub fn revoke(&self, actor: &Principal, visa: &VisaId, user: &UserId) -> Result<Visa> {
        self.0.broker.set_grant(visa, user, GrantAction::Revoke, actor)
    }

    pub fn check_access(&self, who: &Principal, collection: &CollectionId) -> Result<bool> {
        let c = self.0.catalogue.collection(collection)?;
        self.0.broker.check_access(who, &c)
    }

    pub fn request_access(
        &self,
        actor: &Principal,
        collection: &CollectionId,
        message: Option<String>,
    ) -> Result<AccessRequest> {
        let c = self.0.catalogue.collection(collection)?;
        self.0.requests.submit(actor, &c, message, &self.0.broker)
    }

    pub fn list_requests(
        &self,
        actor: &Principal,
        collection: Option<&CollectionId>,
    ) -> Result<Vec<AccessRequest>> {
        let c = collection.map(|id| self.0.catalogue.collection(id)).transpose()?;
        self.0.requests.list(actor, c.as_ref())
    }

    pub fn decide(&self, actor: &Principal, request: &RequestId, decision: Decision) -> Result<AccessRequest> {
        let r = self.0.requests.get(request)?;
        let c = self.0.catalogue.collection(&r.collection_id)?;
        self.0.requests.decide(actor, request, decision, &c, &self.0.broker)
    }
}

/// A collection plus whether the caller may read its files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectionView {
    #[serde(flatten)]
    pub collection: Collection,
    pub has_access: bool,
}

/// Metadata in the catalogue is discoverable by every authenticated user;
/// visas gate object bytes.
pub struct CatalogService<'a>(&'a Lakehouse);

impl CatalogService<'_> {
    pub fn list_collections(&self, _caller: &Principal, page: Option<Page>) -> Result<Listing<Collection>> {
        self.0.catalogue.list_collections(page)
    }

    pub fn create_collection(
        &self,
        actor: &Principal,
        name: &str,
        storage_type: StorageType,
        bucket: &str,
    ) -> Result<Collection> {
        if !actor.role.can_publish() {
            return Err(Error::forbidden("creating collections requires the publisher role"));
        }
        let target = self.0.storage.target(storage_type, bucket)?;
        self.0
            .catalogue
            .create_collection(name, &target, &actor.user_id, &self.0.broker)
    }

    pub fn show_collection(&self, caller: &Principal, id: &CollectionId) -> Result<CollectionView> {
        let collection = self.0.catalogue.collection(id)?;
        let has_access = self.0.broker.check_access(caller, &collection)?;
        Ok(CollectionView {
            collection,
            has_access,
        })
    }

    pub fn list_files(
        &self,
        _caller: &Principal,
        id: &CollectionId,
        page: Option<Page>,
    ) -> Result<Listing<FileRecord>> {
        self.0.catalogue.list_files(id, page)
    }

    pub fn basic_search(&self, _caller: &Principal, keyword: &str, page: Option<Page>) -> Result<Listing<FileRecord>> {
        self.0.catalogue.basic_search(keyword, page)
    }

    pub fn advanced_search(&self, _caller: &Principal, query: &FileQuery) -> Result<Listing<FileRecord>> {
        self.0.catalogue.advanced_search(query)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UploadRequest {
    pub file_name: String,
    pub file_category: FileCategory,
    pub collection_id: CollectionId,
    pub version: Option<u32>,
}

pub fn is_sha256_hex(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

pub struct FileService<'a>(&'a Lakehouse);

impl FileService<'_> {
    /// Registers a pending record and returns a direct-upload ticket for it.
    /// The caller needs a visa grant on the collection.
    pub fn request_upload(&self, actor: &Principal, req: &UploadRequest) -> Result<UploadTicket> {
        let collection = self.0.catalogue.collection(&req.collection_id)?;
        self.0.broker.require_access(actor, &collection)?;
        let key = DedupKey::new(
            req.file_name.clone(),
            collection.id.clone(),
            req.file_category,
            collection.bucket.clone(),
        );
        let record = self.0.catalogue.register_file(&key, &actor.user_id, req.version)?;
        match self.0.storage.issue_upload_ticket(&record, &collection) {
            Ok(ticket) => Ok(ticket),
            Err(e) => {
                // Leave no ghost behind when no ticket could be issued.
                if let Err(purge) = self.0.catalogue.purge_pending(&record.id) {
                    tracing::error!(file_id = %record.id, error = %purge, "compensating purge failed");
                }
                Err(e)
            }
        }
    }

    /// Commits a record once its object is in storage. With a checksum the
    /// stored bytes are verified first. Committing again is a no-op.
    pub async fn commit(&self, actor: &Principal, id: &FileId, checksum: Option<String>) -> Result<FileRecord> {
        if let Some(c) = &checksum {
            if !is_sha256_hex(c) {
                return Err(Error::invalid("checksum", "must be a lowercase hex sha256 digest"));
            }
        }
        let record = self.0.catalogue.file(id)?;
        let collection = self.0.catalogue.collection(&record.collection_id)?;
        self.0.broker.require_access(actor, &collection)?;
        if record.is_committed() {
            return Ok(record);
        }
        let target = self.0.storage.target(collection.storage_type, &collection.bucket)?;
        let backend = self.0.storage.backend_for(&target);
        let path = crate::storage::ObjectPath::parse(record.storage_path.clone())?;
        let size = match &checksum {
            None => match backend.head(&path).await? {
                Some(meta) => meta.size,
                None => return Err(Error::PreconditionFailed(format!("no object uploaded for file {id}"))),
            },
            Some(expected) => {
                let Some(bytes) = backend.get(&path).await? else {
                    return Err(Error::PreconditionFailed(format!("no object uploaded for file {id}")));
                };
                let actual = hex::encode(Sha256::digest(&bytes));
                if &actual != expected {
                    return Err(Error::PreconditionFailed(format!(
                        "stored object checksum {actual} does not match"
                    )));
                }
                bytes.len() as u64
            }
        };
        Ok(self.0.catalogue.commit_file(id, size, checksum)?.record)
    }

    pub fn download_url(&self, actor: &Principal, id: &FileId) -> Result<DownloadGrant> {
        let record = self.0.catalogue.file(id)?;
        if !record.is_committed() {
            return Err(Error::not_found(format!("file {id}")));
        }
        let collection = self.0.catalogue.collection(&record.collection_id)?;
        self.0.broker.require_access(actor, &collection)?;
        self.0.storage.issue_download_grant(&record, &collection)
    }

    pub async fn redeem_upload(&self, ticket: &TicketId, body: Bytes) -> Result<UploadReceipt> {
        self.0.storage.redeem_upload(ticket, body).await
    }

    pub async fn redeem_download(&self, grant: &GrantId) -> Result<Bytes> {
        self.0.storage.redeem_download(grant).await
    }
}

pub struct CredentialService<'a>(&'a Lakehouse);

impl CredentialService<'_> {
    pub fn add(
        &self,
        actor: &Principal,
        storage_type: StorageType,
        label: &str,
        secret: &SecretBytes,
    ) -> Result<CredentialInfo> {
        self.0.vault.add(actor, storage_type, label, secret)
    }

    pub fn list_targets(&self, _caller: &Principal) -> Result<Vec<TargetInfo>> {
        Ok(self.0.storage.list_targets()?.iter().map(|t| t.info()).collect())
    }

    /// Registers a bucket. Remote types must name a stored credential of
    /// the same storage type.
    pub fn register_target(
        &self,
        actor: &Principal,
        storage_type: StorageType,
        bucket: &str,
        credential_id: Option<&CredentialId>,
    ) -> Result<TargetInfo> {
        actor.require_data_manager("registering storage targets")?;
        match (storage_type.needs_credential(), credential_id) {
            (false, Some(_)) => {
                return Err(Error::invalid("credential_id", "local targets take no credential"))
            }
            (true, None) => {
                return Err(Error::invalid(
                    "credential_id",
                    format!("{storage_type} targets require a stored credential"),
                ))
            }
            (true, Some(id)) => {
                let info = self.0.vault.get(id).map_err(|e| match e {
                    Error::NotFound(_) => Error::invalid("credential_id", "no such credential"),
                    other => other,
                })?;
                if info.storage_type != storage_type {
                    return Err(Error::invalid(
                        "credential_id",
                        format!("credential is for {} targets", info.storage_type),
                    ));
                }
            }
            (false, None) => {}
        }
        Ok(self
            .0
            .storage
            .register_target(storage_type, bucket, credential_id.cloned(), None)?
            .info())
    }
}
