//! Abandoned uploads: tickets that were never committed are finalized or
//! purged by the janitor once they expire, and a full reconcile reports
//! drift between the catalogue and the buckets.
//!
//!     cargo run --example janitor

use std::sync::Arc;

use bytes::Bytes;
use chrono::{Duration, Utc};
use lakehouse::catalogue::FileCategory;
use lakehouse::clock::ManualClock;
use lakehouse::governance::{HashCost, NewUser, Password, Principal, Role, SecretKey, UserSettings};
use lakehouse::services::{Lakehouse, ServiceSettings, UploadRequest};
use lakehouse::storage::{StorageType, TransferSettings};
use lakehouse::store::Repository;
use url::Url;

#[tokio::main]
async fn main() {
    let dir = tempfile::tempdir().unwrap();
    let clock = Arc::new(ManualClock::new(Utc::now()));
    let ttl = Duration::minutes(15);
    let mut transfer = TransferSettings::new(Url::parse("http://localhost:8080/").unwrap(), dir.path());
    transfer.upload_ttl = ttl;
    let settings = ServiceSettings {
        users: UserSettings { hash_cost: HashCost::MINIMAL, ..UserSettings::default() },
        transfer,
        purge_grace: ttl,
    };
    let lake = Lakehouse::new(Repository::in_memory(), clock.clone(), SecretKey::generate(), settings);
    lake.storage().register_target(StorageType::Local, "lake", None, None).unwrap();
    let admin = lake
        .users()
        .create(None, NewUser {
            email: "admin@example.org".into(),
            login: "admin".into(),
            password: Password::new("admin-password"),
            role: Role::DataManager,
        })
        .unwrap();
    let admin = Principal::new(admin.id, Role::DataManager);
    let col = lake.catalog().create_collection(&admin, "field", StorageType::Local, "lake").unwrap();

    // Ten clients ask for tickets; six manage the PUT, none call commit.
    for i in 0..10 {
        let req = UploadRequest {
            file_name: format!("sample_{i}.csv"),
            file_category: FileCategory::Structured,
            collection_id: col.id.clone(),
            version: None,
        };
        let t = lake.files().request_upload(&admin, &req).unwrap();
        if i < 6 {
            lake.files().redeem_upload(&t.ticket_id, Bytes::from(format!("id\n{i}\n"))).await.unwrap();
        }
    }
    println!("queued tickets: {}", lake.janitor().queue().unwrap().len());

    let early = lake.sweep(&admin).await.unwrap();
    println!("sweep before expiry:     {early}");

    clock.advance(ttl * 2 + Duration::seconds(1));
    let report = lake.sweep(&admin).await.unwrap();
    println!("sweep after expiry:      {report}");
    println!("committed files listed:  {}", lake.catalog().list_files(&admin, &col.id, None).unwrap().total);
    println!("repeat sweep:            {}", lake.sweep(&admin).await.unwrap());

    // Drop an object behind the catalogue's back and reconcile.
    let first = &lake.catalog().list_files(&admin, &col.id, None).unwrap().items[0];
    std::fs::remove_file(dir.path().join("lake").join(&first.storage_path)).unwrap();
    let drift = lake.reconcile(&admin).await.unwrap();
    println!("reconcile: clean={} flagged={:?}", drift.is_clean(), drift.flagged.iter().map(|f| &f.storage_path).collect::<Vec<_>>());
}
