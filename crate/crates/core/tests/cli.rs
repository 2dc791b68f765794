mod common;

use std::path::Path;

use common::*;
use lakehouse::cli::{self, Env, ProfileStore};
use serde_json::Value;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

async fn lake(env: &Env, args: &[&str]) -> Out {
    let mut stdout = Vec::new();
    let mut stderr = Vec::new();
    let argv = std::iter::once("lake").chain(args.iter().copied());
    let code = cli::run(argv, env, &mut stdout, &mut stderr).await;
    Out {
        code,
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

/// Logs in as the admin through the CLI so later calls use the cached
/// profile.
async fn logged_in(h: &Harness) -> Env {
    let env = Env::with_config_dir(h.dir.path().join("config"));
    let base = h.base().to_string();
    let out = lake(
        &env,
        &["--base-url", &base, "login", "--login", ADMIN_LOGIN, "--password", ADMIN_PASSWORD],
    )
    .await;
    assert_eq!(out.code, 0, "{}", out.stderr);
    env
}

fn json_out(out: &Out) -> Value {
    assert_eq!(out.code, 0, "{}", out.stderr);
    serde_json::from_str(&out.stdout).unwrap()
}

#[tokio::test]
async fn login_caches_the_token_and_listing_prints_a_table() {
    let h = Harness::start().await;
    let env = logged_in(&h).await;
    let profile = ProfileStore::new(&env.config_dir).load("default").unwrap();
    assert!(profile.token.is_some());
    assert_eq!(profile.base_url.as_ref(), Some(h.base()));
    for name in ["alpha", "beta", "gamma"] {
        h.collection(&h.admin_token, name).await;
    }
    let out = lake(&env, &["collections", "list"]).await;
    assert_eq!(out.code, 0, "{}", out.stderr);
    let lines: Vec<&str> = out.stdout.lines().collect();
    assert!(lines[0].starts_with("ID"), "{}", out.stdout);
    let rows: Vec<&&str> = lines.iter().skip(1).filter(|l| !l.trim().is_empty()).collect();
    assert_eq!(rows.len(), 3, "{}", out.stdout);
    for name in ["alpha", "beta", "gamma"] {
        assert!(out.stdout.contains(name));
    }
}

#[tokio::test]
async fn a_failed_login_exits_nonzero_and_caches_nothing() {
    let h = Harness::start().await;
    let env = Env::with_config_dir(h.dir.path().join("config"));
    let base = h.base().to_string();
    let out = lake(&env, &["--base-url", &base, "login", "--login", ADMIN_LOGIN, "--password", "wrong-password"]).await;
    assert_eq!(out.code, cli::EXIT_AUTH);
    assert!(out.stderr.contains("error"), "{}", out.stderr);
    let profile = ProfileStore::new(&env.config_dir).load("default").unwrap();
    assert!(profile.token.is_none());
    assert!(!ProfileStore::new(&env.config_dir).path().exists());
}

#[tokio::test]
async fn upload_from_a_windows_style_path_then_list_and_download() {
    let h = Harness::start().await;
    let env = logged_in(&h).await;
    let col = h.collection(&h.admin_token, "zika").await;
    let col_id = col["id"].as_str().unwrap();
    let data = h.dir.path().join("data");
    std::fs::create_dir_all(&data).unwrap();
    std::fs::write(data.join("zika.csv"), "week,cases\n1,4\n").unwrap();
    let windowsy = format!("{}\\data\\zika.csv", h.dir.path().display());

    let up = json_out(&lake(&env, &["--json", "upload", &windowsy, "--collection", col_id, "--category", "structured"]).await);
    assert_eq!(up["version"], 1);
    assert_eq!(up["status"], "committed");
    assert_eq!(up["storage_path"], "zika/v1/zika.csv");

    let listed = json_out(&lake(&env, &["--json", "files", "list", col_id]).await);
    assert_eq!(listed["items"][0]["file_name"], "zika.csv");
    assert_eq!(listed["items"][0]["version"], 1);
    let table = lake(&env, &["files", "list", col_id]).await;
    assert!(table.stdout.contains("zika.csv"), "{}", table.stdout);

    let again = json_out(&lake(&env, &["--json", "upload", &windowsy, "--collection", col_id, "--category", "structured"]).await);
    assert_eq!(again["version"], 2);

    let target = h.dir.path().join("fetched.csv");
    let target_s = target.display().to_string();
    let file_id = up["id"].as_str().unwrap();
    let out = lake(&env, &["download", file_id, "-o", &target_s]).await;
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(std::fs::read_to_string(&target).unwrap(), "week,cases\n1,4\n");
}

#[tokio::test]
async fn json_output_is_byte_stable() {
    let h = Harness::start().await;
    let env = logged_in(&h).await;
    for name in ["b", "a"] {
        h.collection(&h.admin_token, name).await;
    }
    let first = lake(&env, &["--json", "collections", "list"]).await;
    let second = lake(&env, &["--json", "collections", "list"]).await;
    assert_eq!(first.code, 0);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(json_out(&first)["total"], 2);
}

#[tokio::test]
async fn the_token_variable_overrides_the_profile() {
    let h = Harness::start().await;
    let (_, token) = h.user("viewer", "consumer").await;
    let mut env = Env::with_config_dir(h.dir.path().join("config"));
    let base = h.base().to_string();
    let out = lake(&env, &["--base-url", &base, "collections", "list"]).await;
    assert_eq!(out.code, cli::EXIT_AUTH, "{}", out.stderr);
    env.token = Some(token);
    let out = lake(&env, &["--base-url", &base, "--json", "collections", "list"]).await;
    assert_eq!(json_out(&out)["total"], 0);
    env.token = Some("bogus".into());
    assert_eq!(lake(&env, &["--base-url", &base, "collections", "list"]).await.code, cli::EXIT_AUTH);
}

#[tokio::test]
async fn exit_codes_follow_the_error_class() {
    let h = Harness::start().await;
    let env = logged_in(&h).await;
    let col = h.collection(&h.admin_token, "c").await;
    let col_id = col["id"].as_str().unwrap();

    let missing = lake(&env, &["collections", "show", "nope"]).await;
    assert_eq!(missing.code, cli::EXIT_NOT_FOUND);
    let dup = lake(&env, &["collections", "create", "--name", "c", "--storage-type", "local", "--bucket", BUCKET]).await;
    assert_eq!(dup.code, cli::EXIT_CONFLICT);
    let invalid = lake(&env, &["files", "search", "--filter", "colour=red"]).await;
    assert_eq!(invalid.code, cli::EXIT_USAGE);
    assert!(invalid.stderr.contains("colour"), "{}", invalid.stderr);
    let usage = lake(&env, &["collections", "frobnicate"]).await;
    assert_eq!(usage.code, cli::EXIT_USAGE);
    let no_file = lake(&env, &["upload", "/definitely/not/here.csv", "--collection", col_id, "--category", "structured"]).await;
    assert_eq!(no_file.code, cli::EXIT_IO);

    let (_, token) = h.user("viewer", "consumer").await;
    let mut viewer = Env::with_config_dir(h.dir.path().join("viewer"));
    viewer.token = Some(token);
    let base = h.base().to_string();
    let forbidden = lake(&viewer, &["--base-url", &base, "collections", "create", "--name", "x", "--storage-type", "local", "--bucket", BUCKET]).await;
    assert_eq!(forbidden.code, cli::EXIT_FORBIDDEN);

    let closed = Env::with_config_dir(h.dir.path().join("closed"));
    let down = lake(&closed, &["--base-url", "http://127.0.0.1:9/", "admin", "health"]).await;
    assert_eq!(down.code, cli::EXIT_TRANSPORT);
}

#[tokio::test]
async fn access_requests_round_trip_through_the_cli() {
    let h = Harness::start().await;
    let admin = logged_in(&h).await;
    let col = h.collection(&h.admin_token, "secret").await;
    let col_id = col["id"].as_str().unwrap();
    h.user("asker", "consumer").await;

    let asker = Env::with_config_dir(h.dir.path().join("asker"));
    let base = h.base().to_string();
    let login = lake(&asker, &["--base-url", &base, "auth", "login", "--login", "asker", "--password", "asker-password"]).await;
    assert_eq!(login.code, 0, "{}", login.stderr);
    let req = json_out(&lake(&asker, &["--json", "access", "request", col_id, "--message", "for the trial"]).await);
    let req_id = req["request_id"].as_str().unwrap();
    let shown = json_out(&lake(&asker, &["--json", "collections", "show", col_id]).await);
    assert_eq!(shown["has_access"], false);

    let pending = json_out(&lake(&admin, &["--json", "access", "list", "--collection", col_id]).await);
    assert_eq!(pending.as_array().unwrap().len(), 1);
    let decided = json_out(&lake(&admin, &["--json", "access", "decide", req_id, "granted"]).await);
    assert_eq!(decided["status"], "granted");
    let shown = json_out(&lake(&asker, &["--json", "collections", "show", col_id]).await);
    assert_eq!(shown["has_access"], true);
}

#[tokio::test]
async fn help_and_version_exit_cleanly() {
    let env = Env::with_config_dir(Path::new("/nonexistent-lake-config"));
    let help = lake(&env, &["--help"]).await;
    assert_eq!(help.code, 0);
    assert!(help.stdout.contains("collections"));
    assert_eq!(lake(&env, &["--version"]).await.code, 0);
}
