//! Keyword and filter search over the catalogue. Only committed records
//! are ever returned.
//!
//!     cargo run --example search

use std::sync::Arc;

use bytes::Bytes;
use lakehouse::catalogue::{FileCategory, FileQuery, Page};
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
    let zika = lake.catalog().create_collection(&me, "zika", StorageType::Local, "lake").unwrap();
    let dengue = lake.catalog().create_collection(&me, "dengue", StorageType::Local, "lake").unwrap();

    let files = [
        (&zika, "Zika_cases.csv", FileCategory::Structured, true),
        (&zika, "zika_genome.fasta", FileCategory::Unstructured, true),
        (&zika, "zika_cases.csv", FileCategory::Structured, true),
        (&dengue, "dengue_cases.csv", FileCategory::Structured, true),
        (&dengue, "dengue_cases.csv", FileCategory::Structured, true),
        (&dengue, "zika_crossref.csv", FileCategory::Structured, false),
    ];
    for (col, name, category, commit) in files {
        let req = UploadRequest {
            file_name: name.into(),
            file_category: category,
            collection_id: col.id.clone(),
            version: None,
        };
        let t = lake.files().request_upload(&me, &req).unwrap();
        lake.files().redeem_upload(&t.ticket_id, Bytes::from_static(b"x")).await.unwrap();
        if commit {
            lake.files().commit(&me, &t.file_id, None).await.unwrap();
        }
    }

    let catalog = lake.catalog();
    let hits = catalog.basic_search(&me, "ZIKA", None).unwrap();
    println!("keyword `ZIKA`: {} hit(s), the pending zika_crossref.csv is not among them", hits.total);
    for r in &hits.items {
        println!("  {:<20} v{} {}", r.file_name, r.version, r.file_category.as_str());
    }

    let query = FileQuery::parse(&["file_name=dengue_cases.csv", "version=2"]).unwrap();
    let hits = catalog.advanced_search(&me, &query).unwrap();
    println!("file_name=dengue_cases.csv, version=2: {:?}", hits.items.iter().map(|r| &r.storage_path).collect::<Vec<_>>());

    let query = FileQuery::parse(&[format!("collection_id={}", zika.id), "file_category=structured".into()]).unwrap();
    println!("structured files in zika: {}", catalog.advanced_search(&me, &query).unwrap().total);

    let page = catalog.basic_search(&me, "csv", Some(Page::new(Some(1), Some(2)).unwrap())).unwrap();
    println!("`csv` page offset=1 limit=2: {} of {} total", page.items.len(), page.total);

    let err = FileQuery::parse(&["colour=red", "version=0"]).unwrap_err();
    println!("a bad query names every field: {err}");
}
