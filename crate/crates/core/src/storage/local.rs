use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use async_trait::async_trait;
use bytes::Bytes;
use tokio::fs;
use tokio::io::AsyncWriteExt;
use url::Url;

use super::backend::{DirectTransfer, ObjectBackend, ObjectMeta, ObjectPath, StorageError};
use super::StorageType;

/// Staging area for in-flight writes; never part of the object namespace.
const PARTIAL_DIR: &str = ".partial";

/// Filesystem backend: one root directory per bucket, objects stored at
/// their path below it. Writes land in a staging file and are renamed into
/// place, so readers only ever see complete objects.
#[derive(Debug, Clone)]
pub struct LocalBackend {
    root: PathBuf,
}

fn unavailable(e: std::io::Error) -> StorageError {
    StorageError::Unavailable(e.to_string())
}

impl LocalBackend {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn resolve(&self, path: &ObjectPath) -> Result<PathBuf, StorageError> {
        let mut full = self.root.clone();
        for (i, seg) in path.segments().enumerate() {
            if i == 0 && seg == PARTIAL_DIR {
                return Err(StorageError::InvalidPath(format!("`{path}`: reserved prefix")));
            }
            full.push(seg);
        }
        debug_assert!(full.starts_with(&self.root));
        Ok(full)
    }
}

#[async_trait]
impl ObjectBackend for LocalBackend {
    fn storage_type(&self) -> StorageType {
        StorageType::Local
    }

    async fn put(&self, path: &ObjectPath, body: Bytes) -> Result<u64, StorageError> {
        let target = self.resolve(path)?;
        let staging = self.root.join(PARTIAL_DIR);
        fs::create_dir_all(&staging).await.map_err(unavailable)?;
        let tmp = staging.join(uuid::Uuid::new_v4().to_string());
        let result = async {
            let mut f = fs::File::create(&tmp).await?;
            f.write_all(&body).await?;
            f.sync_all().await?;
            drop(f);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent).await?;
            }
            fs::rename(&tmp, &target).await
        }
        .await;
        if let Err(e) = result {
            let _ = fs::remove_file(&tmp).await;
            return Err(unavailable(e));
        }
        Ok(body.len() as u64)
    }

    async fn get(&self, path: &ObjectPath) -> Result<Option<Bytes>, StorageError> {
        let full = self.resolve(path)?;
        match fs::read(&full).await {
            Ok(b) => Ok(Some(Bytes::from(b))),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
            Err(e) if e.kind() == ErrorKind::IsADirectory => Ok(None),
            Err(e) => Err(unavailable(e)),
        }
    }

    async fn head(&self, path: &ObjectPath) -> Result<Option<ObjectMeta>, StorageError> {
        let full = self.resolve(path)?;
        match fs::metadata(&full).await {
            Ok(m) if m.is_file() => Ok(Some(ObjectMeta { size: m.len() })),
            Ok(_) => Ok(None),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
            Err(e) => Err(unavailable(e)),
        }
    }

    async fn delete(&self, path: &ObjectPath) -> Result<(), StorageError> {
        let full = self.resolve(path)?;
        match fs::remove_file(&full).await {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(()),
            Err(e) => Err(unavailable(e)),
        }
    }

    async fn list(&self) -> Result<Vec<ObjectPath>, StorageError> {
        let mut out = Vec::new();
        let mut stack = vec![(self.root.clone(), String::new())];
        while let Some((dir, prefix)) = stack.pop() {
            let mut entries = match fs::read_dir(&dir).await {
                Ok(e) => e,
                Err(e) if e.kind() == ErrorKind::NotFound => continue,
                Err(e) => return Err(unavailable(e)),
            };
            while let Some(entry) = entries.next_entry().await.map_err(unavailable)? {
                let name = entry.file_name().to_string_lossy().into_owned();
                if prefix.is_empty() && name == PARTIAL_DIR {
                    continue;
                }
                let rel = if prefix.is_empty() {
                    name
                } else {
                    format!("{prefix}/{name}")
                };
                let ty = entry.file_type().await.map_err(unavailable)?;
                if ty.is_dir() {
                    stack.push((entry.path(), rel));
                } else if ty.is_file() {
                    // Names that are not valid object paths cannot have been written by us.
                    if let Ok(p) = ObjectPath::parse(rel) {
                        out.push(p);
                    }
                }
            }
        }
        out.sort();
        Ok(out)
    }

    fn direct_url(&self, transfer: &DirectTransfer<'_>, gateway: &Url) -> Result<Url, StorageError> {
        // Same endpoint for both directions: PUT redeems a ticket, GET a grant.
        // The object path is resolved server-side from the capability id.
        gateway
            .join(&format!("raw/{}", transfer.capability))
            .map_err(|e| StorageError::Unavailable(format!("bad gateway url: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::TransferKind;

    fn p(s: &str) -> ObjectPath {
        ObjectPath::parse(s).unwrap()
    }

    #[tokio::test]
    async fn put_get_head_delete_list() {
        let dir = tempfile::tempdir().unwrap();
        let b = LocalBackend::new(dir.path().join("bucketX"));
        assert!(b.list().await.unwrap().is_empty());
        assert!(!b.exists(&p("c/v1/a.csv")).await.unwrap());
        let n = b.put(&p("c/v1/a.csv"), Bytes::from_static(b"x,y\n1,2\n")).await.unwrap();
        assert_eq!(n, 8);
        assert_eq!(b.head(&p("c/v1/a.csv")).await.unwrap(), Some(ObjectMeta { size: 8 }));
        assert_eq!(&b.get(&p("c/v1/a.csv")).await.unwrap().unwrap()[..], b"x,y\n1,2\n");
        b.put(&p("c/v2/a.csv"), Bytes::new()).await.unwrap();
        assert_eq!(b.list().await.unwrap(), vec![p("c/v1/a.csv"), p("c/v2/a.csv")]);
        b.delete(&p("c/v1/a.csv")).await.unwrap();
        assert!(!b.exists(&p("c/v1/a.csv")).await.unwrap());
        b.delete(&p("c/v1/a.csv")).await.unwrap();
        // directories are not objects
        assert!(!b.exists(&p("c/v2")).await.unwrap());
        assert!(b.get(&p("c")).await.unwrap().is_none());
    }

    #[tokio::test]
    async fn staging_area_is_hidden_and_unaddressable() {
        let dir = tempfile::tempdir().unwrap();
        let b = LocalBackend::new(dir.path());
        b.put(&p("a/v1/x"), Bytes::from_static(b"1")).await.unwrap();
        std::fs::write(dir.path().join(PARTIAL_DIR).join("junk"), b"partial").unwrap();
        assert_eq!(b.list().await.unwrap(), vec![p("a/v1/x")]);
        assert!(matches!(
            b.put(&p(".partial/evil"), Bytes::new()).await,
            Err(StorageError::InvalidPath(_))
        ));
    }

    #[tokio::test]
    async fn io_failures_are_transport_errors_not_absence() {
        let dir = tempfile::tempdir().unwrap();
        let file_root = dir.path().join("not-a-dir");
        std::fs::write(&file_root, b"").unwrap();
        let b = LocalBackend::new(&file_root);
        let err = b.put(&p("a/v1/x"), Bytes::from_static(b"1")).await.unwrap_err();
        assert!(matches!(err, StorageError::Unavailable(_)));
        assert!(matches!(b.head(&p("a/v1/x")).await, Err(StorageError::Unavailable(_))));
    }

    #[test]
    fn direct_urls_point_at_the_gateway_raw_endpoint() {
        let b = LocalBackend::new("/tmp/x");
        let path = p("c/v1/a");
        let url = b
            .direct_url(
                &DirectTransfer {
                    kind: TransferKind::Upload,
                    capability: "t-123",
                    path: &path,
                    expires_at: chrono::Utc::now(),
                },
                &Url::parse("http://127.0.0.1:9000/").unwrap(),
            )
            .unwrap();
        assert_eq!(url.as_str(), "http://127.0.0.1:9000/raw/t-123");
    }
}
