//! Visa-gated access: a consumer asks for a collection, the owner decides,
//! access is checked, revoked and granted directly.
//!
//!     cargo run --example access_control

use std::sync::Arc;

use lakehouse::clock::SystemClock;
use lakehouse::governance::{Decision, HashCost, NewUser, Password, Principal, Role, SecretKey, UserSettings};
use lakehouse::services::{Lakehouse, ServiceSettings};
use lakehouse::storage::{StorageType, TransferSettings};
use lakehouse::store::Repository;
use url::Url;

fn user(lake: &Lakehouse, actor: Option<&Principal>, login: &str, role: Role) -> Principal {
    let profile = lake
        .users()
        .create(actor, NewUser {
            email: format!("{login}@example.org"),
            login: login.into(),
            password: Password::new(format!("{login}-password")),
            role,
        })
        .unwrap();
    Principal::new(profile.id, role)
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let settings = ServiceSettings {
        users: UserSettings { hash_cost: HashCost::MINIMAL, ..UserSettings::default() },
        transfer: TransferSettings::new(Url::parse("http://localhost:8080/").unwrap(), dir.path()),
        purge_grace: chrono::Duration::minutes(15),
    };
    let lake = Lakehouse::new(Repository::in_memory(), Arc::new(SystemClock), SecretKey::generate(), settings);
    lake.storage().register_target(StorageType::Local, "lake", None, None).unwrap();

    let admin = user(&lake, None, "admin", Role::DataManager);
    let owner = user(&lake, Some(&admin), "olga", Role::Publisher);
    let reader = user(&lake, Some(&admin), "rui", Role::Consumer);
    let other = user(&lake, Some(&admin), "sam", Role::Consumer);

    let col = lake.catalog().create_collection(&owner, "trial", StorageType::Local, "lake").unwrap();
    let visas = lake.visas();
    let show = |who: &Principal| visas.check_access(who, &col.id).unwrap();
    println!("owner={} admin={} rui={} sam={}", show(&owner), show(&admin), show(&reader), show(&other));

    let req = visas.request_access(&reader, &col.id, Some("cohort analysis".into())).unwrap();
    println!("rui asks: request {} is {:?}", req.request_id, req.status);
    let again = visas.request_access(&reader, &col.id, None).unwrap_err();
    println!("asking twice while pending -> {}", again.code());

    let meddling = visas.decide(&other, &req.request_id, Decision::Granted).unwrap_err();
    println!("sam tries to decide -> {}", meddling.code());

    let pending = visas.list_requests(&owner, Some(&col.id)).unwrap();
    println!("owner sees {} pending request(s)", pending.len());
    let decided = visas.decide(&owner, &req.request_id, Decision::Granted).unwrap();
    println!("owner decides: {:?}; rui has access = {}", decided.status, show(&reader));

    visas.revoke(&owner, &col.visa_id, &reader.user_id).unwrap();
    println!("after revoke: rui has access = {}", show(&reader));

    visas.grant(&admin, &col.visa_id, &other.user_id).unwrap();
    println!("admin grants sam directly: sam has access = {}", show(&other));

    let err = visas.revoke(&admin, &col.visa_id, &owner.user_id).unwrap_err();
    println!("revoking the owner -> {}", err.code());

    // Metadata stays discoverable without a grant; only downloads are gated.
    let listed = lake.catalog().list_collections(&reader, None).unwrap();
    println!("rui can still list {} collection(s)", listed.total);
}
