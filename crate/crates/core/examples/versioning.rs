//! Version assignment for repeated uploads of the same file: automatic
//! numbering, explicit versions, collisions, and purging a pending version.
//!
//!     cargo run --example versioning

use std::sync::Arc;

use bytes::Bytes;
use lakehouse::catalogue::{DedupKey, FileCategory};
use lakehouse::clock::SystemClock;
use lakehouse::governance::{HashCost, NewUser, Password, Principal, Role, SecretKey, UserSettings};
use lakehouse::services::{Lakehouse, ServiceSettings, UploadRequest};
use lakehouse::storage::{StorageType, TransferSettings};
use lakehouse::store::Repository;
use url::Url;

#[tokio::main]
async fn main() {
    let dir = tempfile::tempdir().unwrap();
    let settings = ServiceSettings {
        users: UserSettings { hash_cost: HashCost::MINIMAL, ..UserSettings::default() },
        transfer: TransferSettings::new(Url::parse("http://localhost:8080/").unwrap(), dir.path()),
        purge_grace: chrono::Duration::minutes(15),
    };
    let lake = Lakehouse::new(Repository::in_memory(), Arc::new(SystemClock), SecretKey::generate(), settings);
    lake.storage().register_target(StorageType::Local, "lake", None, None).unwrap();
    let me = lake
        .users()
        .create(None, NewUser {
            email: "ada@example.org".into(),
            login: "ada".into(),
            password: Password::new("correct horse"),
            role: Role::DataManager,
        })
        .unwrap();
    let me = Principal::new(me.id, Role::DataManager);
    let col = lake.catalog().create_collection(&me, "dengue", StorageType::Local, "lake").unwrap();

    let upload = |name: &str, version: Option<u32>| UploadRequest {
        file_name: name.into(),
        file_category: FileCategory::Structured,
        collection_id: col.id.clone(),
        version,
    };

    // Three uploads of the same name in the same collection and category.
    for round in 1..=3 {
        let t = lake.files().request_upload(&me, &upload("cases.csv", None)).unwrap();
        lake.files().redeem_upload(&t.ticket_id, Bytes::from(format!("round {round}\n"))).await.unwrap();
        let r = lake.files().commit(&me, &t.file_id, None).await.unwrap();
        println!("cases.csv  -> v{} at {}", r.version, r.storage_path);
    }

    // Any change to the key starts a fresh lineage.
    let t = lake.files().request_upload(&me, &upload("Cases.csv", None)).unwrap();
    println!("Cases.csv  -> v{} (names are case-sensitive)", t.version);

    // An explicit version is honoured when free and refused when taken.
    let t = lake.files().request_upload(&me, &upload("cases.csv", Some(10))).unwrap();
    println!("cases.csv  -> v{} requested explicitly", t.version);
    let clash = lake.files().request_upload(&me, &upload("cases.csv", Some(2))).unwrap_err();
    println!("cases.csv v2 again -> {} ({})", clash.code(), clash);

    // Pending versions count: the next automatic number follows v10.
    let key = DedupKey::new("cases.csv", col.id.clone(), FileCategory::Structured, "lake");
    println!("next automatic version would be v{}", lake.catalogue().resolve_version(&key, None).unwrap().version);

    // Dropping the pending v10 frees its number again.
    lake.catalogue().purge_pending(&t.file_id).unwrap();
    println!("after purging the pending v10, next is v{}", lake.catalogue().resolve_version(&key, None).unwrap().version);

    let listed = lake.catalog().list_files(&me, &col.id, None).unwrap();
    let versions: Vec<u32> = listed.items.iter().map(|r| r.version).collect();
    println!("committed versions visible in listings: {versions:?}");
}
