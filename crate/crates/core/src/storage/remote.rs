use async_trait::async_trait;
use bytes::Bytes;
use url::Url;

use super::backend::{DirectTransfer, ObjectBackend, ObjectMeta, ObjectPath, StorageError};
use super::StorageType;

/// Placeholder for S3-, GCS- and HDFS-compatible targets. Targets of these
/// types can be registered and hold collections; any data-plane call fails
/// with [`StorageError::NotConfigured`] until a vendor adapter is wired in
/// through [`super::Storage::attach_backend`].
#[derive(Debug, Clone)]
pub struct UnconfiguredBackend {
    storage_type: StorageType,
}

impl UnconfiguredBackend {
    pub fn new(storage_type: StorageType) -> Self {
        Self { storage_type }
    }

    fn fail<T>(&self) -> Result<T, StorageError> {
        Err(StorageError::NotConfigured(self.storage_type))
    }
}

#[async_trait]
impl ObjectBackend for UnconfiguredBackend {
    fn storage_type(&self) -> StorageType {
        self.storage_type
    }

    async fn put(&self, _path: &ObjectPath, _body: Bytes) -> Result<u64, StorageError> {
        self.fail()
    }

    async fn get(&self, _path: &ObjectPath) -> Result<Option<Bytes>, StorageError> {
        self.fail()
    }

    async fn head(&self, _path: &ObjectPath) -> Result<Option<ObjectMeta>, StorageError> {
        self.fail()
    }

    async fn delete(&self, _path: &ObjectPath) -> Result<(), StorageError> {
        self.fail()
    }

    async fn list(&self) -> Result<Vec<ObjectPath>, StorageError> {
        self.fail()
    }

    fn direct_url(&self, _transfer: &DirectTransfer<'_>, _gateway: &Url) -> Result<Url, StorageError> {
        self.fail()
    }
}
