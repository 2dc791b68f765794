//! Storage credentials are sealed with the platform key before they are
//! written; the store only ever holds the token.
//!
//!     cargo run --example credential_vault

use std::sync::Arc;

use lakehouse::clock::SystemClock;
use lakehouse::governance::{Fernet, HashCost, NewUser, Password, Principal, Role, SecretBytes, SecretKey, UserSettings};
use lakehouse::services::{Lakehouse, ServiceSettings};
use lakehouse::storage::{StorageType, TransferSettings};
use lakehouse::store::{Keyspace, Repository};
use url::Url;

fn main() {
    // Token format on its own.
    let key = SecretKey::generate();
    let fernet = Fernet::new(key.clone());
    let token = fernet.seal(b"hello");
    println!("sealed 5 bytes into a {}-char token: {}...", token.len(), &token[..24]);
    println!("opened: {:?}", String::from_utf8(fernet.open(&token).unwrap()).unwrap());
    let mut tampered = token.clone().into_bytes();
    tampered[30] ^= 1;
    let tampered = String::from_utf8_lossy(&tampered).into_owned();
    println!("tampered token opens: {}", fernet.open(&tampered).is_ok());
    println!("other key opens: {}", Fernet::new(SecretKey::generate()).open(&token).is_ok());

    // The vault inside the platform.
    let dir = tempfile::tempdir().unwrap();
    let settings = ServiceSettings {
        users: UserSettings { hash_cost: HashCost::MINIMAL, ..UserSettings::default() },
        transfer: TransferSettings::new(Url::parse("http://localhost:8080/").unwrap(), dir.path()),
        purge_grace: chrono::Duration::minutes(15),
    };
    let lake = Lakehouse::new(Repository::in_memory(), Arc::new(SystemClock), key, settings);
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
    let secret = SecretBytes::new(&b"AKIAEXAMPLE:wJalrXUtnFEMI/K7MDENG"[..]);
    let info = lake.credentials().add(&admin, StorageType::S3Compatible, "archive", &secret).unwrap();
    println!("stored credential {} ({}, {:?})", info.credential_id, info.storage_type, info.label);

    let mut leaked = false;
    for ks in Keyspace::ALL {
        for (_, doc) in lake.repo().scan_raw(ks).unwrap() {
            leaked |= doc.body.to_string().contains("wJalrXUtnFEMI");
        }
    }
    println!("plaintext present anywhere in the store: {leaked}");
    let back = lake.vault().reveal(&info.credential_id).unwrap();
    println!("revealed for the adapter: {} bytes, equal = {}", back.len(), back.expose() == secret.expose());

    let target = lake.credentials().register_target(&admin, StorageType::S3Compatible, "archive", Some(&info.credential_id)).unwrap();
    println!("bucket {}/{} bound to credential {:?}", target.storage_type, target.bucket, target.credential_id);
}
