#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{Duration, TimeZone, Utc};
use lakehouse::clock::{ManualClock, SharedClock};
use lakehouse::gateway::{self, RunningGateway};
use lakehouse::governance::{HashCost, SecretKey, UserSettings};
use lakehouse::services::{Lakehouse, ServiceSettings};
use lakehouse::storage::{StorageType, TransferSettings};
use lakehouse::store::{FileStore, Repository};
use reqwest::{Method, StatusCode};
use serde_json::{json, Value};
use url::Url;

pub const ADMIN_LOGIN: &str = "admin";
pub const ADMIN_PASSWORD: &str = "admin-password-1";
pub const BUCKET: &str = "lake";

pub fn start_time() -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 3, 1, 12, 0, 0).unwrap()
}

pub fn settings(base: Url, objects: &Path, ttl: Duration) -> ServiceSettings {
    let mut transfer = TransferSettings::new(base, objects);
    transfer.upload_ttl = ttl;
    transfer.download_ttl = ttl;
    ServiceSettings {
        users: UserSettings {
            hash_cost: HashCost::MINIMAL,
            ..UserSettings::default()
        },
        transfer,
        purge_grace: ttl,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backing {
    Memory,
    File,
}

pub struct Options {
    pub backing: Backing,
    pub ttl: Duration,
    pub key: SecretKey,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            backing: Backing::Memory,
            ttl: Duration::minutes(15),
            key: SecretKey::from_bytes([7; 32]),
        }
    }
}

/// A gateway on an ephemeral port with a manual clock, a registered local
/// bucket and a bootstrapped data manager.
pub struct Harness {
    pub dir: tempfile::TempDir,
    pub clock: Arc<ManualClock>,
    pub gw: RunningGateway,
    pub api: Api,
    pub admin_token: String,
    pub admin_id: String,
}

impl Harness {
    pub async fn start() -> Self {
        Self::with(Options::default()).await
    }

    pub async fn with(opts: Options) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let clock = Arc::new(ManualClock::new(start_time()));
        let shared: SharedClock = clock.clone();
        let objects = dir.path().join("objects");
        let store_dir = dir.path().join("catalogue");
        let backing = opts.backing;
        let gw = gateway::spawn(move |base| {
            let repo = match backing {
                Backing::Memory => Repository::in_memory(),
                Backing::File => Repository::new(Arc::new(FileStore::open(&store_dir).unwrap())),
            };
            Ok(Lakehouse::new(repo, shared, opts.key, settings(base, &objects, opts.ttl)))
        })
        .await
        .unwrap();
        gw.lake
            .storage()
            .register_target(StorageType::Local, BUCKET, None, None)
            .unwrap();
        let api = Api::new(gw.base_url.clone());
        let (status, body) = api
            .call(
                Method::POST,
                "users",
                None,
                Some(json!({"email": "admin@example.org", "login": ADMIN_LOGIN,
                            "password": ADMIN_PASSWORD, "role": "data-manager"})),
            )
            .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        let admin_id = body["data"]["id"].as_str().unwrap().to_owned();
        let admin_token = api.login(ADMIN_LOGIN, ADMIN_PASSWORD).await;
        Self {
            dir,
            clock,
            gw,
            api,
            admin_token,
            admin_id,
        }
    }

    pub fn lake(&self) -> &Arc<Lakehouse> {
        &self.gw.lake
    }

    pub fn base(&self) -> &Url {
        &self.gw.base_url
    }

    pub fn objects_dir(&self) -> PathBuf {
        self.dir.path().join("objects")
    }

    pub fn store_dir(&self) -> PathBuf {
        self.dir.path().join("catalogue")
    }

    /// Creates a user through the gateway and logs in. Returns (id, token).
    pub async fn user(&self, login: &str, role: &str) -> (String, String) {
        let password = format!("{login}-password");
        let (status, body) = self
            .api
            .call(
                Method::POST,
                "users",
                Some(&self.admin_token),
                Some(json!({"email": format!("{login}@example.org"), "login": login,
                            "password": password, "role": role})),
            )
            .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        let id = body["data"]["id"].as_str().unwrap().to_owned();
        (id, self.api.login(login, &password).await)
    }

    /// Creates a collection on the local bucket. Returns the collection JSON.
    pub async fn collection(&self, token: &str, name: &str) -> Value {
        let (status, body) = self
            .api
            .call(
                Method::POST,
                "collections",
                Some(token),
                Some(json!({"name": name, "storage_type": "local", "bucket": BUCKET})),
            )
            .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        body["data"].clone()
    }

    /// Requests a ticket for `name` in `collection`. Returns the ticket JSON.
    pub async fn ticket(&self, token: &str, collection: &str, name: &str, category: &str) -> Value {
        let (status, body) = self
            .api
            .call(
                Method::POST,
                "files/upload-request",
                Some(token),
                Some(json!({"file_name": name, "file_category": category, "collection_id": collection})),
            )
            .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        body["data"].clone()
    }

    /// Ticket, PUT, commit. Returns the committed record JSON.
    pub async fn upload(&self, token: &str, collection: &str, name: &str, bytes: &[u8]) -> Value {
        let t = self.ticket(token, collection, name, "structured").await;
        let (status, body) = self.api.put_raw(t["upload_url"].as_str().unwrap(), bytes.to_vec()).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        let (status, body) = self
            .api
            .call(
                Method::POST,
                &format!("files/{}/commit", t["file_id"].as_str().unwrap()),
                Some(token),
                Some(json!({})),
            )
            .await;
        assert_eq!(status, StatusCode::OK, "{body}");
        body["data"].clone()
    }
}

#[derive(Clone)]
pub struct Api {
    pub base: Url,
    pub http: reqwest::Client,
}

impl Api {
    pub fn new(base: Url) -> Self {
        Self {
            base,
            http: reqwest::Client::new(),
        }
    }

    pub fn url(&self, path: &str) -> Url {
        self.base.join(path).unwrap()
    }

    /// Sends one request. Returns the status and the parsed body.
    pub async fn call(&self, method: Method, path: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
        let mut req = self.http.request(method, self.url(path));
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req.send().await.unwrap();
        let status = resp.status();
        let text = resp.text().await.unwrap();
        let value = serde_json::from_str(&text).unwrap_or_else(|_| panic!("non-JSON response {status}: {text}"));
        (status, value)
    }

    /// Like [`Api::call`] with a raw text body.
    pub async fn call_text(&self, method: Method, path: &str, token: Option<&str>, body: &str) -> (StatusCode, Value) {
        let mut req = self
            .http
            .request(method, self.url(path))
            .header("content-type", "application/json")
            .body(body.to_owned());
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().await.unwrap();
        let status = resp.status();
        (status, resp.json().await.unwrap())
    }

    pub async fn login(&self, login: &str, password: &str) -> String {
        let (status, body) = self
            .call(Method::POST, "auth/login", None, Some(json!({"login": login, "password": password})))
            .await;
        assert_eq!(status, StatusCode::OK, "{body}");
        body["data"]["token"].as_str().unwrap().to_owned()
    }

    pub async fn put_raw(&self, url: &str, bytes: Vec<u8>) -> (StatusCode, Value) {
        let resp = self.http.put(url).body(bytes).send().await.unwrap();
        let status = resp.status();
        (status, resp.json().await.unwrap())
    }

    pub async fn get_raw(&self, url: &str) -> (StatusCode, Vec<u8>) {
        let resp = self.http.get(url).send().await.unwrap();
        let status = resp.status();
        (status, resp.bytes().await.unwrap().to_vec())
    }
}

pub fn error_code(body: &Value) -> &str {
    assert_eq!(body["ok"], json!(false), "expected an error envelope: {body}");
    body["error"]["code"].as_str().unwrap()
}

pub fn error_fields(body: &Value) -> Vec<String> {
    body["error"]["details"]
        .as_array()
        .map(|d| d.iter().map(|e| e["field"].as_str().unwrap().to_owned()).collect())
        .unwrap_or_default()
}

/// Every regular file under `root`, as paths relative to it with `/` separators.
pub fn files_under(root: &Path) -> Vec<String> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) {
        let Ok(entries) = std::fs::read_dir(dir) else { return };
        for e in entries.flatten() {
            let p = e.path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap();
                out.push(rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

/// The platform without HTTP, for library-level tests.
pub struct Local {
    pub dir: tempfile::TempDir,
    pub clock: Arc<ManualClock>,
    pub lake: Arc<Lakehouse>,
    pub admin: lakehouse::governance::Principal,
}

impl Local {
    pub fn new(ttl: Duration) -> Self {
        Self::with_repo(ttl, Repository::in_memory())
    }

    pub fn with_repo(ttl: Duration, repo: Repository) -> Self {
        use lakehouse::governance::{NewUser, Password, Principal, Role};
        let dir = tempfile::tempdir().unwrap();
        let clock = Arc::new(ManualClock::new(start_time()));
        let base = Url::parse("http://gateway.test/").unwrap();
        let lake = Arc::new(Lakehouse::new(
            repo,
            clock.clone(),
            SecretKey::from_bytes([9; 32]),
            settings(base, &dir.path().join("objects"), ttl),
        ));
        lake.storage()
            .register_target(StorageType::Local, BUCKET, None, None)
            .unwrap();
        let profile = lake
            .users()
            .create(
                None,
                NewUser {
                    email: "admin@example.org".into(),
                    login: ADMIN_LOGIN.into(),
                    password: Password::new(ADMIN_PASSWORD),
                    role: Role::DataManager,
                },
            )
            .unwrap();
        let admin = Principal::new(profile.id, Role::DataManager);
        Self { dir, clock, lake, admin }
    }

    pub fn user(&self, login: &str, role: lakehouse::governance::Role) -> lakehouse::governance::Principal {
        use lakehouse::governance::{NewUser, Password, Principal};
        let profile = self
            .lake
            .users()
            .create(
                Some(&self.admin),
                NewUser {
                    email: format!("{login}@example.org"),
                    login: login.into(),
                    password: Password::new(format!("{login}-password")),
                    role,
                },
            )
            .unwrap();
        Principal::new(profile.id, role)
    }

    pub fn collection(&self, owner: &lakehouse::governance::Principal, name: &str) -> lakehouse::catalogue::Collection {
        self.lake
            .catalog()
            .create_collection(owner, name, StorageType::Local, BUCKET)
            .unwrap()
    }

    pub fn request(
        &self,
        who: &lakehouse::governance::Principal,
        collection: &lakehouse::catalogue::Collection,
        name: &str,
    ) -> lakehouse::storage::UploadTicket {
        self.lake
            .files()
            .request_upload(
                who,
                &lakehouse::services::UploadRequest {
                    file_name: name.into(),
                    file_category: lakehouse::catalogue::FileCategory::Structured,
                    collection_id: collection.id.clone(),
                    version: None,
                },
            )
            .unwrap()
    }

    /// Object paths present in the local bucket.
    pub async fn stored_paths(&self) -> std::collections::BTreeSet<String> {
        self.lake
            .storage()
            .backend(StorageType::Local, BUCKET)
            .unwrap()
            .list()
            .await
            .unwrap()
            .into_iter()
            .map(|p| p.as_str().to_owned())
            .collect()
    }

    /// Storage paths of committed records.
    pub fn committed_paths(&self) -> std::collections::BTreeSet<String> {
        self.lake
            .repo()
            .scan::<lakehouse::catalogue::FileRecord>(lakehouse::store::Keyspace::Files, "")
            .unwrap()
            .into_iter()
            .filter(|r| r.value.is_committed())
            .map(|r| r.value.storage_path)
            .collect()
    }
}
