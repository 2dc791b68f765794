//! The durable document store: state written by one process is visible
//! after reopening the same directory, and compaction keeps it intact.
//!
//!     cargo run --example file_store

use std::sync::Arc;

use lakehouse::clock::SystemClock;
use lakehouse::governance::{HashCost, NewUser, Password, Principal, Role, SecretKey, UserSettings};
use lakehouse::services::{Lakehouse, ServiceSettings};
use lakehouse::storage::{StorageType, TransferSettings};
use lakehouse::store::{FileStore, Repository};
use url::Url;

fn open(root: &std::path::Path, key: &SecretKey) -> (Lakehouse, Arc<FileStore>) {
    let store = Arc::new(FileStore::open(root.join("catalogue")).unwrap());
    let settings = ServiceSettings {
        users: UserSettings { hash_cost: HashCost::MINIMAL, ..UserSettings::default() },
        transfer: TransferSettings::new(Url::parse("http://localhost:8080/").unwrap(), root.join("objects")),
        purge_grace: chrono::Duration::minutes(15),
    };
    let lake = Lakehouse::new(Repository::new(store.clone()), Arc::new(SystemClock), key.clone(), settings);
    (lake, store)
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let key = SecretKey::generate();
    {
        let (lake, _) = open(dir.path(), &key);
        lake.storage().register_target(StorageType::Local, "lake", None, None).unwrap();
        let admin = lake
            .users()
            .create(None, NewUser {
                email: "ada@example.org".into(),
                login: "ada".into(),
                password: Password::new("correct horse"),
                role: Role::DataManager,
            })
            .unwrap();
        let admin = Principal::new(admin.id, Role::DataManager);
        for name in ["zika", "dengue", "chikungunya"] {
            lake.catalog().create_collection(&admin, name, StorageType::Local, "lake").unwrap();
        }
        println!("first process wrote store revision {}", lake.repo().revision().unwrap());
    }

    let (lake, store) = open(dir.path(), &key);
    let names: Vec<String> = lake.catalogue().list_collections(None).unwrap().items.into_iter().map(|c| c.name).collect();
    println!("reopened: collections {names:?}");
    let token = lake.users().login("ada", &Password::new("correct horse")).unwrap();
    println!("login after reopen works; session expires {}", token.expires_at);

    store.compact().unwrap();
    drop(lake);
    let (lake, _) = open(dir.path(), &key);
    println!("after compaction: {} collections, revision {}", lake.catalogue().list_collections(None).unwrap().total, lake.repo().revision().unwrap());
}
