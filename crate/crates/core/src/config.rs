//! Service configuration, read from a TOML file.
//!
//! ```toml
//! bind = "127.0.0.1:8080"
//! data_dir = "/var/lib/lakehouse"
//! upload_ttl_secs = 900
//!
//! [[targets]]
//! storage_type = "local"
//! bucket = "bucketX"
//! ```
//!
//! The vault key is never part of the file; it comes from
//! `LAKEHOUSE_SECRET_KEY`.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use chrono::Duration;
use serde::{Deserialize, Serialize};
use url::Url;

use crate::error::{Error, Result};
use crate::governance::{HashCost, UserSettings};
use crate::ids::CredentialId;
use crate::storage::{normalize_base, StorageType, TransferSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoreKind {
    #[default]
    File,
    Memory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub storage_type: StorageType,
    pub bucket: String,
    /// Root directory for local targets, endpoint for remote ones.
    #[serde(default)]
    pub location: Option<String>,
    #[serde(default)]
    pub credential_id: Option<CredentialId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub bind: SocketAddr,
    /// Base URL clients use to reach the gateway; defaults to `http://{bind}/`.
    pub public_url: Option<Url>,
    pub data_dir: PathBuf,
    pub store: StoreKind,
    pub fsync: bool,
    pub upload_ttl_secs: i64,
    pub download_ttl_secs: i64,
    pub token_ttl_secs: i64,
    pub reset_ttl_secs: i64,
    /// Extra time after ticket expiry before an absent object counts as
    /// abandoned. Defaults to the upload TTL.
    pub purge_grace_secs: Option<i64>,
    /// Seconds between background sweeps; 0 disables them.
    pub janitor_interval_secs: u64,
    pub open_registration: bool,
    pub hash_cost: HashCost,
    pub targets: Vec<TargetConfig>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            public_url: None,
            data_dir: PathBuf::from("lakehouse-data"),
            store: StoreKind::File,
            fsync: true,
            upload_ttl_secs: TransferSettings::DEFAULT_TTL_MINUTES * 60,
            download_ttl_secs: TransferSettings::DEFAULT_TTL_MINUTES * 60,
            token_ttl_secs: 12 * 3600,
            reset_ttl_secs: 3600,
            purge_grace_secs: None,
            janitor_interval_secs: 60,
            open_registration: true,
            hash_cost: HashCost::default(),
            targets: Vec::new(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("upload_ttl_secs", self.upload_ttl_secs),
            ("download_ttl_secs", self.download_ttl_secs),
            ("token_ttl_secs", self.token_ttl_secs),
            ("reset_ttl_secs", self.reset_ttl_secs),
        ];
        for (name, v) in positive {
            if v <= 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.purge_grace_secs.is_some_and(|g| g < 0) {
            return Err(Error::Config("purge_grace_secs must not be negative".into()));
        }
        argon2::Params::new(self.hash_cost.memory_kib, self.hash_cost.iterations, 1, None)
            .map_err(|e| Error::Config(format!("hash_cost: {e}")))?;
        Ok(())
    }

    pub fn public_url(&self) -> Url {
        let url = self.public_url.clone().unwrap_or_else(|| {
            Url::parse(&format!("http://{}/", self.bind)).expect("socket address forms a valid url")
        });
        normalize_base(url)
    }

    pub fn transfer_settings(&self) -> TransferSettings {
        let mut t = TransferSettings::new(self.public_url(), self.data_dir.join("objects"));
        t.upload_ttl = Duration::seconds(self.upload_ttl_secs);
        t.download_ttl = Duration::seconds(self.download_ttl_secs);
        t
    }

    pub fn user_settings(&self) -> UserSettings {
        UserSettings {
            token_ttl: Duration::seconds(self.token_ttl_secs),
            reset_ttl: Duration::seconds(self.reset_ttl_secs),
            open_registration: self.open_registration,
            hash_cost: self.hash_cost,
        }
    }

    pub fn purge_grace(&self) -> Duration {
        Duration::seconds(self.purge_grace_secs.unwrap_or(self.upload_ttl_secs))
    }
}
