//! The `lake` command line: one subcommand per gateway capability.
//!
//! Output is a table by default and pretty JSON with sorted keys under
//! `--json`. Failures exit with a code per error class (see [`exit_code`]).

mod client;
mod output;
mod profile;

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, CommandFactory, Parser, Subcommand};
use reqwest::Method;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use url::Url;

pub use client::Client;
pub use output::View;
pub use profile::{CliProfile, OutputMode, ProfileStore, DEFAULT_BASE_URL, DEFAULT_PROFILE};

use crate::clock::SystemClock;
use crate::config::Config;
use crate::error::{Error, ErrorCode};
use crate::gateway::{self, ErrorBody};
use crate::governance::SecretKey;
use crate::janitor::{ReconcileReport, SweepReport};
use crate::services::Lakehouse;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}", describe(.0))]
    Api(ErrorBody),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Local(Error),
}

fn describe(e: &ErrorBody) -> String {
    let mut s = format!("{}: {}", e.code, e.message);
    for d in &e.details {
        s.push_str(&format!("\n  {}: {}", d.field, d.message));
    }
    s
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Local(e)
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_PRECONDITION: i32 = 65;
pub const EXIT_NOT_FOUND: i32 = 66;
pub const EXIT_TRANSPORT: i32 = 69;
pub const EXIT_INTERNAL: i32 = 70;
pub const EXIT_CONFLICT: i32 = 73;
pub const EXIT_IO: i32 = 74;
pub const EXIT_FORBIDDEN: i32 = 76;
pub const EXIT_AUTH: i32 = 77;
pub const EXIT_CONFIG: i32 = 78;

pub fn exit_for_code(code: ErrorCode) -> i32 {
    match code {
        ErrorCode::Validation => EXIT_USAGE,
        ErrorCode::PreconditionFailed => EXIT_PRECONDITION,
        ErrorCode::NotFound => EXIT_NOT_FOUND,
        ErrorCode::Transport => EXIT_TRANSPORT,
        ErrorCode::Internal => EXIT_INTERNAL,
        ErrorCode::Conflict => EXIT_CONFLICT,
        ErrorCode::Forbidden => EXIT_FORBIDDEN,
        ErrorCode::Authentication => EXIT_AUTH,
    }
}

pub fn exit_code(err: &CliError) -> i32 {
    match err {
        CliError::Api(e) => exit_for_code(e.code),
        CliError::Transport(_) => EXIT_TRANSPORT,
        CliError::Usage(_) => EXIT_USAGE,
        CliError::Io(_) => EXIT_IO,
        CliError::Local(Error::Config(_)) => EXIT_CONFIG,
        CliError::Local(e) => exit_for_code(e.code()),
    }
}

/// Process-level inputs, kept explicit so tests can run in parallel.
#[derive(Debug, Clone)]
pub struct Env {
    pub config_dir: PathBuf,
    /// `LAKE_TOKEN`, overriding the profile token.
    pub token: Option<String>,
    /// `LAKEHOUSE_SECRET_KEY`, needed by `admin serve`.
    pub secret_key: Option<String>,
}

impl Env {
    pub fn from_process() -> Self {
        Self {
            config_dir: ProfileStore::default_dir(),
            token: std::env::var("LAKE_TOKEN").ok().filter(|t| !t.is_empty()),
            secret_key: std::env::var("LAKEHOUSE_SECRET_KEY").ok(),
        }
    }

    pub fn with_config_dir(dir: impl Into<PathBuf>) -> Self {
        Self {
            config_dir: dir.into(),
            token: None,
            secret_key: None,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lake", version, about = "Operate a lakehouse gateway")]
pub struct Cli {
    /// Profile holding the base URL and cached token.
    #[arg(long, global = true, default_value = DEFAULT_PROFILE)]
    pub profile: String,
    #[arg(long, global = true)]
    pub base_url: Option<Url>,
    /// Print the response data as JSON.
    #[arg(long, global = true)]
    pub json: bool,
    /// Print nothing on success.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    #[command(subcommand)]
    Auth(AuthCmd),
    #[command(subcommand)]
    Users(UsersCmd),
    #[command(subcommand)]
    Collections(CollectionsCmd),
    #[command(subcommand)]
    Files(FilesCmd),
    #[command(subcommand)]
    Buckets(BucketsCmd),
    #[command(subcommand)]
    Credentials(CredentialsCmd),
    #[command(subcommand)]
    Access(AccessCmd),
    #[command(subcommand)]
    Visas(VisasCmd),
    #[command(subcommand)]
    Admin(AdminCmd),
}

#[derive(Debug, Subcommand)]
pub enum AuthCmd {
    /// Log in and cache the token in the profile.
    Login {
        #[arg(long)]
        login: String,
        /// Read from stdin when omitted.
        #[arg(long)]
        password: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum UsersCmd {
    Create {
        #[arg(long)]
        email: String,
        #[arg(long)]
        login: String,
        #[arg(long)]
        password: String,
        #[arg(long)]
        role: Option<String>,
    },
    Update {
        id: String,
        #[arg(long)]
        email: Option<String>,
        #[arg(long)]
        password: Option<String>,
        #[arg(long)]
        role: Option<String>,
    },
    Delete { id: String },
    /// Issue a reset token (data manager), or redeem one with --token.
    Reset {
        id: String,
        #[arg(long, requires = "new_password")]
        token: Option<String>,
        #[arg(long, requires = "token")]
        new_password: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, Args)]
pub struct PageArgs {
    #[arg(long)]
    pub offset: Option<u64>,
    #[arg(long)]
    pub limit: Option<u64>,
}

impl PageArgs {
    fn query(&self) -> Vec<(&'static str, String)> {
        let mut q = Vec::new();
        if let Some(o) = self.offset {
            q.push(("offset", o.to_string()));
        }
        if let Some(l) = self.limit {
            q.push(("limit", l.to_string()));
        }
        q
    }

    fn insert_into(&self, body: &mut Value) {
        if let Some(o) = self.offset {
            body["offset"] = json!(o);
        }
        if let Some(l) = self.limit {
            body["limit"] = json!(l);
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum CollectionsCmd {
    List {
        #[command(flatten)]
        page: PageArgs,
    },
    Create {
        #[arg(long)]
        name: String,
        #[arg(long)]
        storage_type: String,
        #[arg(long)]
        bucket: String,
    },
    Show { id: String },
}

#[derive(Debug, Subcommand)]
pub enum FilesCmd {
    /// Committed files of a collection.
    List {
        collection: String,
        #[command(flatten)]
        page: PageArgs,
    },
    /// Keyword search, or filter search with repeated --filter field=value.
    Search {
        #[arg(long, conflicts_with = "filter")]
        keyword: Option<String>,
        #[arg(long)]
        filter: Vec<String>,
        #[command(flatten)]
        page: PageArgs,
    },
    /// Request a ticket, send the bytes and commit.
    Upload {
        path: String,
        #[arg(long)]
        collection: String,
        #[arg(long)]
        category: String,
        #[arg(long)]
        version: Option<u32>,
        /// Catalogue name; defaults to the file name of PATH.
        #[arg(long)]
        name: Option<String>,
    },
    Download {
        file_id: String,
        /// Defaults to the stored file name in the current directory.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum BucketsCmd {
    List,
    Register {
        #[arg(long)]
        storage_type: String,
        #[arg(long)]
        bucket: String,
        #[arg(long)]
        credential: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum CredentialsCmd {
    Add {
        #[arg(long)]
        storage_type: String,
        #[arg(long)]
        label: String,
        /// File holding the secret; `-` reads stdin.
        #[arg(long)]
        secret_file: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum AccessCmd {
    Request {
        collection: String,
        #[arg(long)]
        message: Option<String>,
    },
    List {
        #[arg(long)]
        collection: Option<String>,
    },
    Decide {
        request: String,
        /// `granted` or `denied`.
        decision: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum VisasCmd {
    Grant { visa: String, user: String },
    Revoke { visa: String, user: String },
}

#[derive(Debug, Subcommand)]
pub enum AdminCmd {
    /// Run the gateway in this process.
    Serve(ServeArgs),
    #[command(subcommand)]
    Janitor(JanitorCmd),
    Health,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub bind: Option<std::net::SocketAddr>,
    /// Use a throwaway encryption key when LAKEHOUSE_SECRET_KEY is unset.
    #[arg(long)]
    pub dev_insecure: bool,
}

#[derive(Debug, Subcommand)]
pub enum JanitorCmd {
    Sweep,
    Reconcile,
}

/// Gateway routes each leaf subcommand calls, as (method, path).
pub const COMMAND_ROUTES: &[(&str, &[(&str, &str)])] = &[
    ("auth login", &[("POST", "/auth/login")]),
    ("users create", &[("POST", "/users")]),
    ("users update", &[("PATCH", "/users/{id}")]),
    ("users delete", &[("DELETE", "/users/{id}")]),
    ("users reset", &[("POST", "/users/{id}/password-reset")]),
    ("collections list", &[("GET", "/collections")]),
    ("collections create", &[("POST", "/collections")]),
    ("collections show", &[("GET", "/collections/{id}")]),
    ("files list", &[("GET", "/collections/{id}/files")]),
    ("files search", &[("GET", "/files/search"), ("POST", "/files/search")]),
    (
        "files upload",
        &[
            ("POST", "/files/upload-request"),
            ("PUT", "/raw/{id}"),
            ("POST", "/files/{id}/commit"),
        ],
    ),
    ("files download", &[("GET", "/files/{id}/download-url"), ("GET", "/raw/{id}")]),
    ("buckets list", &[("GET", "/buckets")]),
    ("buckets register", &[("POST", "/buckets")]),
    ("credentials add", &[("POST", "/credentials")]),
    ("access request", &[("POST", "/access-requests")]),
    ("access list", &[("GET", "/access-requests")]),
    ("access decide", &[("POST", "/access-requests/{id}/decision")]),
    ("visas grant", &[("POST", "/visas/{id}/grants")]),
    ("visas revoke", &[("DELETE", "/visas/{id}/grants/{user_id}")]),
    ("admin serve", &[]),
    ("admin janitor sweep", &[("POST", "/admin/janitor/sweep")]),
    ("admin janitor reconcile", &[("POST", "/admin/janitor/reconcile")]),
    ("admin health", &[("GET", "/health")]),
];

/// Space-joined paths of every leaf subcommand.
pub fn leaf_commands() -> Vec<String> {
    fn walk(cmd: &clap::Command, prefix: &str, out: &mut Vec<String>) {
        for sub in cmd.get_subcommands().filter(|s| s.get_name() != "help") {
            let path = if prefix.is_empty() {
                sub.get_name().to_owned()
            } else {
                format!("{prefix} {}", sub.get_name())
            };
            if sub.has_subcommands() {
                walk(sub, &path, out);
            } else {
                out.push(path);
            }
        }
    }
    let mut out = Vec::new();
    walk(&Cli::command(), "", &mut out);
    out
}

/// Accepts `lake login` and `lake upload` as shorthands.
fn expand_shorthand(mut args: Vec<String>) -> Vec<String> {
    let first = args
        .iter()
        .enumerate()
        .skip(1)
        .scan(false, |skip_value, (i, a)| {
            let takes_value = matches!(a.as_str(), "--profile" | "--base-url");
            let r = if *skip_value || a.starts_with('-') { None } else { Some(i) };
            *skip_value = takes_value;
            Some(r)
        })
        .flatten()
        .next();
    if let Some(i) = first {
        let group = match args[i].as_str() {
            "login" => Some("auth"),
            "upload" | "download" | "search" => Some("files"),
            _ => None,
        };
        if let Some(g) = group {
            args.insert(i, g.to_owned());
        }
    }
    args
}

/// Splits on both `/` and `\` so Windows-style paths work everywhere.
pub fn normalize_path(raw: &str) -> PathBuf {
    let mut out = PathBuf::new();
    if raw.starts_with('/') || raw.starts_with('\\') {
        out.push(std::path::MAIN_SEPARATOR.to_string());
    }
    for part in raw.split(['/', '\\']).filter(|p| !p.is_empty()) {
        out.push(part);
    }
    out
}

struct Session {
    store: ProfileStore,
    profile_name: String,
    profile: CliProfile,
    client: Client,
}

impl Session {
    fn base_url(&self) -> &Url {
        self.client.base()
    }
}

/// A finished command: the response data and how to show it.
struct Outcome {
    data: Value,
    view: View,
}

fn outcome(data: Value, view: View) -> Result<Outcome, CliError> {
    Ok(Outcome { data, view })
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub async fn run<I, T>(args: I, env: &Env, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let args = expand_shorthand(args.into_iter().map(Into::into).collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    match execute(&cli, env, out).await {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

async fn execute(cli: &Cli, env: &Env, out: &mut dyn Write) -> Result<(), CliError> {
    if let Command::Admin(AdminCmd::Serve(args)) = &cli.command {
        return serve(args, env, out).await;
    }
    let store = ProfileStore::new(&env.config_dir);
    let profile = store
        .load(&cli.profile)
        .map_err(|e| CliError::Io(format!("reading profile: {e}")))?;
    let base = cli
        .base_url
        .clone()
        .or_else(|| profile.base_url.clone())
        .unwrap_or_else(|| Url::parse(DEFAULT_BASE_URL).expect("default base url parses"));
    let token = env.token.clone().or_else(|| profile.token.clone());
    let mode = if cli.json { OutputMode::Json } else { profile.output };
    let mut session = Session {
        store,
        profile_name: cli.profile.clone(),
        profile,
        client: Client::new(base, token),
    };
    let done = dispatch(&cli.command, &mut session).await?;
    if !cli.quiet {
        let text = match mode {
            OutputMode::Json => output::json(&done.data),
            OutputMode::Table => output::render(&done.data, done.view),
        };
        writeln!(out, "{text}").map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}

const COLLECTION_COLUMNS: &[&str] = &["id", "name", "storage_type", "bucket", "owner_id"];
const FILE_COLUMNS: &[&str] = &["id", "file_name", "version", "file_category", "size_bytes", "storage_path"];
const FILE_FIELDS: &[&str] = &[
    "id",
    "collection_id",
    "file_name",
    "file_category",
    "version",
    "storage_path",
    "status",
    "size_bytes",
    "checksum",
];
const USER_FIELDS: &[&str] = &["id", "login", "email", "role", "created_at"];
const REQUEST_COLUMNS: &[&str] = &["request_id", "requester_id", "collection_id", "status", "created_at"];
const TARGET_COLUMNS: &[&str] = &["storage_type", "bucket", "credential_id", "registered_at"];

fn seg(s: &str) -> String {
    url::form_urlencoded::byte_serialize(s.as_bytes()).collect()
}

fn some_fields(pairs: &[(&str, &Option<String>)]) -> Value {
    let mut m = serde_json::Map::new();
    for (k, v) in pairs {
        if let Some(v) = v {
            m.insert((*k).to_owned(), json!(v));
        }
    }
    Value::Object(m)
}

fn visa_line(v: &Value) -> String {
    let holders: Vec<String> = v["grants"]
        .as_array()
        .map(|g| {
            g.iter()
                .filter(|r| r["revoked_at"].is_null())
                .map(|r| output::cell(r.get("user_id")))
                .collect()
        })
        .unwrap_or_default();
    format!(
        "visa {} for collection {}: {}",
        output::cell(v.get("visa_id")),
        output::cell(v.get("collection_id")),
        if holders.is_empty() { "no grants".to_owned() } else { holders.join(", ") }
    )
}

fn reset_line(v: &Value) -> String {
    match v.get("reset_token") {
        Some(t) => format!(
            "reset token {} (expires {})",
            output::cell(Some(t)),
            output::cell(v.get("expires_at"))
        ),
        None => format!("password reset for {}", output::cell(v.get("user_id"))),
    }
}

fn sweep_line(v: &Value) -> String {
    serde_json::from_value::<SweepReport>(v.clone())
        .map(|r| r.to_string())
        .unwrap_or_else(|_| v.to_string())
}

fn reconcile_line(v: &Value) -> String {
    serde_json::from_value::<ReconcileReport>(v.clone())
        .map(|r| r.to_string())
        .unwrap_or_else(|_| v.to_string())
}

fn read_password(given: &Option<String>) -> Result<String, CliError> {
    if let Some(p) = given {
        return Ok(p.clone());
    }
    let mut line = String::new();
    std::io::stdin()
        .lock()
        .read_line(&mut line)
        .map_err(|e| CliError::Io(format!("reading password: {e}")))?;
    Ok(line.trim_end_matches(['\r', '\n']).to_owned())
}

fn read_secret(source: &str) -> Result<String, CliError> {
    let bytes = if source == "-" {
        let mut buf = Vec::new();
        std::io::Read::read_to_end(&mut std::io::stdin().lock(), &mut buf)
            .map_err(|e| CliError::Io(format!("reading secret: {e}")))?;
        buf
    } else {
        std::fs::read(normalize_path(source)).map_err(|e| CliError::Io(format!("reading {source}: {e}")))?
    };
    let text = String::from_utf8(bytes).map_err(|_| CliError::Usage("secret must be UTF-8 text".into()))?;
    Ok(text.trim_end_matches(['\r', '\n']).to_owned())
}

async fn dispatch(cmd: &Command, s: &mut Session) -> Result<Outcome, CliError> {
    let c = &s.client;
    match cmd {
        Command::Auth(AuthCmd::Login { login, password }) => {
            let password = read_password(password)?;
            let data = c
                .call(Method::POST, "auth/login", Some(&json!({"login": login, "password": password})))
                .await?;
            let token = data["token"]
                .as_str()
                .ok_or_else(|| CliError::Transport("login response without token".into()))?;
            s.profile.token = Some(token.to_owned());
            s.profile.base_url = Some(s.base_url().clone());
            s.store
                .save(&s.profile_name, &s.profile)
                .map_err(|e| CliError::Io(format!("saving profile: {e}")))?;
            outcome(data, View::Record(&["user_id", "issued_at", "expires_at"]))
        }
        Command::Users(u) => match u {
            UsersCmd::Create {
                email,
                login,
                password,
                role,
            } => {
                let mut body = json!({"email": email, "login": login, "password": password});
                if let Some(r) = role {
                    body["role"] = json!(r);
                }
                outcome(c.call(Method::POST, "users", Some(&body)).await?, View::Record(USER_FIELDS))
            }
            UsersCmd::Update {
                id,
                email,
                password,
                role,
            } => {
                let body = some_fields(&[("email", email), ("password", password), ("role", role)]);
                let path = format!("users/{}", seg(id));
                outcome(c.call(Method::PATCH, &path, Some(&body)).await?, View::Record(USER_FIELDS))
            }
            UsersCmd::Delete { id } => outcome(
                c.call(Method::DELETE, &format!("users/{}", seg(id)), None).await?,
                View::Record(&["id", "deleted"]),
            ),
            UsersCmd::Reset {
                id,
                token,
                new_password,
            } => {
                let body = some_fields(&[("reset_token", token), ("new_password", new_password)]);
                let path = format!("users/{}/password-reset", seg(id));
                outcome(c.call(Method::POST, &path, Some(&body)).await?, View::Line(reset_line))
            }
        },
        Command::Collections(cc) => match cc {
            CollectionsCmd::List { page } => outcome(
                c.get_query("collections", &page.query()).await?,
                View::Table(COLLECTION_COLUMNS),
            ),
            CollectionsCmd::Create {
                name,
                storage_type,
                bucket,
            } => outcome(
                c.call(
                    Method::POST,
                    "collections",
                    Some(&json!({"name": name, "storage_type": storage_type, "bucket": bucket})),
                )
                .await?,
                View::Record(&["id", "name", "storage_type", "bucket", "owner_id", "visa_id"]),
            ),
            CollectionsCmd::Show { id } => outcome(
                c.call(Method::GET, &format!("collections/{}", seg(id)), None).await?,
                View::Record(&[
                    "id",
                    "name",
                    "storage_type",
                    "bucket",
                    "owner_id",
                    "visa_id",
                    "created_at",
                    "has_access",
                ]),
            ),
        },
        Command::Files(f) => files(f, c).await,
        Command::Buckets(b) => match b {
            BucketsCmd::List => outcome(c.call(Method::GET, "buckets", None).await?, View::Table(TARGET_COLUMNS)),
            BucketsCmd::Register {
                storage_type,
                bucket,
                credential,
            } => {
                let mut body = json!({"storage_type": storage_type, "bucket": bucket});
                if let Some(id) = credential {
                    body["credential_id"] = json!(id);
                }
                outcome(c.call(Method::POST, "buckets", Some(&body)).await?, View::Record(TARGET_COLUMNS))
            }
        },
        Command::Credentials(CredentialsCmd::Add {
            storage_type,
            label,
            secret_file,
        }) => {
            let secret = read_secret(secret_file)?;
            let body = json!({"storage_type": storage_type, "label": label, "secret": secret});
            outcome(
                c.call(Method::POST, "credentials", Some(&body)).await?,
                View::Record(&["credential_id", "storage_type", "label", "created_at"]),
            )
        }
        Command::Access(a) => match a {
            AccessCmd::Request { collection, message } => {
                let mut body = json!({"collection_id": collection});
                if let Some(m) = message {
                    body["message"] = json!(m);
                }
                outcome(
                    c.call(Method::POST, "access-requests", Some(&body)).await?,
                    View::Record(REQUEST_COLUMNS),
                )
            }
            AccessCmd::List { collection } => {
                let q: Vec<(&str, String)> = collection.iter().map(|id| ("collection", id.clone())).collect();
                outcome(c.get_query("access-requests", &q).await?, View::Table(REQUEST_COLUMNS))
            }
            AccessCmd::Decide { request, decision } => outcome(
                c.call(
                    Method::POST,
                    &format!("access-requests/{}/decision", seg(request)),
                    Some(&json!({"decision": decision})),
                )
                .await?,
                View::Record(&["request_id", "status", "decided_by", "decided_at"]),
            ),
        },
        Command::Visas(v) => match v {
            VisasCmd::Grant { visa, user } => outcome(
                c.call(
                    Method::POST,
                    &format!("visas/{}/grants", seg(visa)),
                    Some(&json!({"user_id": user})),
                )
                .await?,
                View::Line(visa_line),
            ),
            VisasCmd::Revoke { visa, user } => outcome(
                c.call(Method::DELETE, &format!("visas/{}/grants/{}", seg(visa), seg(user)), None)
                    .await?,
                View::Line(visa_line),
            ),
        },
        Command::Admin(a) => match a {
            AdminCmd::Serve(_) => unreachable!("serve is handled before a session is built"),
            AdminCmd::Janitor(JanitorCmd::Sweep) => outcome(
                c.call(Method::POST, "admin/janitor/sweep", None).await?,
                View::Line(sweep_line),
            ),
            AdminCmd::Janitor(JanitorCmd::Reconcile) => outcome(
                c.call(Method::POST, "admin/janitor/reconcile", None).await?,
                View::Line(reconcile_line),
            ),
            AdminCmd::Health => outcome(
                c.call(Method::GET, "health", None).await?,
                View::Line(|v| output::cell(v.get("status"))),
            ),
        },
    }
}

async fn files(cmd: &FilesCmd, c: &Client) -> Result<Outcome, CliError> {
    match cmd {
        FilesCmd::List { collection, page } => outcome(
            c.get_query(&format!("collections/{}/files", seg(collection)), &page.query())
                .await?,
            View::Table(FILE_COLUMNS),
        ),
        FilesCmd::Search { keyword, filter, page } => {
            let data = match keyword {
                Some(k) => {
                    let mut q = page.query();
                    q.push(("keyword", k.clone()));
                    c.get_query("files/search", &q).await?
                }
                None => {
                    let mut body = json!({"filters": filter});
                    page.insert_into(&mut body);
                    c.call(Method::POST, "files/search", Some(&body)).await?
                }
            };
            outcome(data, View::Table(FILE_COLUMNS))
        }
        FilesCmd::Upload {
            path,
            collection,
            category,
            version,
            name,
        } => {
            let local = normalize_path(path);
            let file_name = match name {
                Some(n) => n.clone(),
                None => local
                    .file_name()
                    .and_then(|n| n.to_str())
                    .map(str::to_owned)
                    .ok_or_else(|| CliError::Usage(format!("{path} has no file name")))?,
            };
            let bytes = std::fs::read(&local).map_err(|e| CliError::Io(format!("reading {}: {e}", local.display())))?;
            let checksum = hex::encode(Sha256::digest(&bytes));
            let mut body = json!({
                "file_name": file_name,
                "file_category": category,
                "collection_id": collection,
            });
            if let Some(v) = version {
                body["version"] = json!(v);
            }
            let ticket = c.call(Method::POST, "files/upload-request", Some(&body)).await?;
            let (Some(upload_url), Some(file_id)) = (ticket["upload_url"].as_str(), ticket["file_id"].as_str()) else {
                return Err(CliError::Transport("upload ticket without url".into()));
            };
            c.put_bytes(upload_url, bytes).await?;
            let record = c
                .call(
                    Method::POST,
                    &format!("files/{}/commit", seg(file_id)),
                    Some(&json!({"checksum": checksum})),
                )
                .await?;
            outcome(record, View::Record(FILE_FIELDS))
        }
        FilesCmd::Download { file_id, output } => {
            let grant = c
                .call(Method::GET, &format!("files/{}/download-url", seg(file_id)), None)
                .await?;
            let url = grant["download_url"]
                .as_str()
                .ok_or_else(|| CliError::Transport("download grant without url".into()))?;
            let bytes = c.get_bytes(url).await?;
            let target = match output {
                Some(p) => p.clone(),
                None => PathBuf::from(
                    grant["storage_path"]
                        .as_str()
                        .and_then(|p| p.rsplit('/').next())
                        .filter(|n| !n.is_empty() && *n != "." && *n != "..")
                        .unwrap_or(file_id),
                ),
            };
            write_file(&target, &bytes)?;
            let data = json!({
                "file_id": file_id,
                "path": target.display().to_string(),
                "size_bytes": bytes.len(),
            });
            outcome(
                data,
                View::Line(|v| {
                    format!(
                        "wrote {} bytes to {}",
                        output::cell(v.get("size_bytes")),
                        output::cell(v.get("path"))
                    )
                }),
            )
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("creating {}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

async fn serve(args: &ServeArgs, env: &Env, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(b) = args.bind {
        config.bind = b;
    }
    let key = match (&env.secret_key, args.dev_insecure) {
        (Some(k), _) => SecretKey::from_base64(k)?,
        (None, true) => {
            tracing::warn!("LAKEHOUSE_SECRET_KEY is unset; sealing credentials with a throwaway key");
            SecretKey::generate()
        }
        (None, false) => {
            return Err(CliError::Local(Error::Config(
                "LAKEHOUSE_SECRET_KEY is not set (pass --dev-insecure for a throwaway key)".into(),
            )))
        }
    };
    let lake = Arc::new(Lakehouse::open(&config, key, Arc::new(SystemClock))?);
    let listener = tokio::net::TcpListener::bind(config.bind)
        .await
        .map_err(|e| CliError::Io(format!("binding {}: {e}", config.bind)))?;
    let addr = listener.local_addr().map_err(|e| CliError::Io(e.to_string()))?;
    let sweeper = lake
        .janitor()
        .clone()
        .spawn_interval(std::time::Duration::from_secs(config.janitor_interval_secs));
    writeln!(out, "listening on http://{addr}/").map_err(|e| CliError::Io(e.to_string()))?;
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    let served = gateway::serve(lake, listener, shutdown).await;
    sweeper.abort();
    Ok(served?)
}
