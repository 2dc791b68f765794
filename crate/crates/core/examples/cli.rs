//! Drives the `lake` command line against an in-process gateway, the same
//! way a shell session would.
//!
//!     cargo run --example cli

use std::sync::Arc;

use lakehouse::cli::{self, Env};
use lakehouse::clock::SystemClock;
use lakehouse::gateway;
use lakehouse::governance::{HashCost, NewUser, Password, Role, SecretKey, UserSettings};
use lakehouse::services::{Lakehouse, ServiceSettings};
use lakehouse::storage::{StorageType, TransferSettings};
use lakehouse::store::Repository;

async fn lake(env: &Env, args: &[&str]) -> i32 {
    println!("$ lake {}", args.join(" "));
    let argv = std::iter::once("lake").chain(args.iter().copied());
    let code = cli::run(argv, env, &mut std::io::stdout(), &mut std::io::stderr()).await;
    if code != 0 {
        println!("(exit {code})");
    }
    code
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
    gw.lake
        .users()
        .create(None, NewUser {
            email: "ada@example.org".into(),
            login: "ada".into(),
            password: Password::new("correct horse"),
            role: Role::DataManager,
        })
        .unwrap();

    let env = Env::with_config_dir(dir.path().join("config"));
    let base = gw.base_url.to_string();
    let data = dir.path().join("cases.csv");
    std::fs::write(&data, "week,cases\n1,12\n2,30\n").unwrap();
    let data = data.display().to_string();
    let fetched = dir.path().join("fetched.csv").display().to_string();

    lake(&env, &["--base-url", &base, "login", "--login", "ada", "--password", "correct horse"]).await;
    lake(&env, &["buckets", "list"]).await;
    lake(&env, &["collections", "create", "--name", "zika", "--storage-type", "local", "--bucket", "lake"]).await;
    lake(&env, &["collections", "list"]).await;
    let col = gw.lake.catalogue().list_collections(None).unwrap().items[0].id.to_string();
    lake(&env, &["upload", &data, "--collection", &col, "--category", "structured"]).await;
    lake(&env, &["upload", &data, "--collection", &col, "--category", "structured"]).await;
    lake(&env, &["files", "list", &col]).await;
    lake(&env, &["search", "--keyword", "CASES"]).await;
    lake(&env, &["--json", "files", "search", "--filter", "version=2"]).await;
    let file = gw.lake.catalogue().basic_search("cases", None).unwrap().items[0].id.to_string();
    lake(&env, &["download", &file, "-o", &fetched]).await;
    println!("{}", std::fs::read_to_string(&fetched).unwrap());
    lake(&env, &["files", "search", "--filter", "colour=red"]).await;
    lake(&env, &["admin", "janitor", "sweep"]).await;
    gw.stop();
}
