//! Starts a gateway on a local port and walks the HTTP API: bootstrap a
//! data manager, create a collection, upload through a ticket, commit,
//! list and download.
//!
//!     cargo run --example quickstart

use std::sync::Arc;

use lakehouse::clock::SystemClock;
use lakehouse::gateway;
use lakehouse::governance::{HashCost, SecretKey, UserSettings};
use lakehouse::services::{Lakehouse, ServiceSettings};
use lakehouse::storage::{StorageType, TransferSettings};
use lakehouse::store::Repository;
use serde_json::{json, Value};

async fn call(req: reqwest::RequestBuilder) -> Value {
    let resp = req.send().await.expect("gateway reachable");
    let status = resp.status();
    let body: Value = resp.json().await.expect("json envelope");
    assert!(status.is_success(), "{status}: {body}");
    body["data"].clone()
}

#[tokio::main]
async fn main() {
    let dir = tempfile::tempdir().unwrap();
    let objects = dir.path().join("objects");
    let gw = gateway::spawn(move |base| {
        let settings = ServiceSettings {
            users: UserSettings { hash_cost: HashCost::MINIMAL, ..UserSettings::default() },
            transfer: TransferSettings::new(base, &objects),
            purge_grace: chrono::Duration::minutes(15),
        };
        Ok(Lakehouse::new(Repository::in_memory(), Arc::new(SystemClock), SecretKey::generate(), settings))
    })
    .await
    .unwrap();
    gw.lake.storage().register_target(StorageType::Local, "lake", None, None).unwrap();
    println!("gateway listening on {}", gw.base_url);

    let http = reqwest::Client::new();
    let url = |p: &str| gw.base_url.join(p).unwrap();

    // The first user needs no token and must be a data manager.
    let admin = call(http.post(url("users")).json(&json!({
        "email": "ada@example.org", "login": "ada", "password": "correct horse", "role": "data-manager"
    })))
    .await;
    println!("created {} ({})", admin["login"], admin["role"]);
    let token = call(http.post(url("auth/login")).json(&json!({"login": "ada", "password": "correct horse"})))
        .await["token"]
        .as_str()
        .unwrap()
        .to_owned();

    let col = call(http.post(url("collections")).bearer_auth(&token).json(&json!({
        "name": "zika", "storage_type": "local", "bucket": "lake"
    })))
    .await;
    let col_id = col["id"].as_str().unwrap();
    println!("collection {} -> {col_id}", col["name"]);

    let ticket = call(http.post(url("files/upload-request")).bearer_auth(&token).json(&json!({
        "file_name": "cases.csv", "file_category": "structured", "collection_id": col_id
    })))
    .await;
    println!("ticket for v{} at {}", ticket["version"], ticket["storage_path"]);
    let body = "week,cases\n1,12\n2,30\n3,15\n";
    call(http.put(ticket["upload_url"].as_str().unwrap()).body(body)).await;
    let file_id = ticket["file_id"].as_str().unwrap();
    let record = call(http.post(url(&format!("files/{file_id}/commit"))).bearer_auth(&token).json(&json!({}))).await;
    println!("committed {} v{} ({} bytes)", record["file_name"], record["version"], record["size_bytes"]);

    let files = call(http.get(url(&format!("collections/{col_id}/files"))).bearer_auth(&token)).await;
    println!("{} committed file(s) in zika", files["total"]);

    let grant = call(http.get(url(&format!("files/{file_id}/download-url"))).bearer_auth(&token)).await;
    let fetched = http.get(grant["download_url"].as_str().unwrap()).send().await.unwrap().text().await.unwrap();
    assert_eq!(fetched, body);
    println!("downloaded {} bytes, contents match", fetched.len());
    gw.stop();
}
