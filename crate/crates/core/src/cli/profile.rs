use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use url::Url;

pub const DEFAULT_PROFILE: &str = "default";
pub const DEFAULT_BASE_URL: &str = "http://127.0.0.1:8080/";
const FILE_NAME: &str = "profiles.toml";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    #[default]
    Table,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliProfile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<Url>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
    #[serde(default)]
    pub output: OutputMode,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct ProfileFile {
    #[serde(default)]
    profiles: BTreeMap<String, CliProfile>,
}

/// Profiles kept in a single TOML file readable only by its owner.
#[derive(Debug, Clone)]
pub struct ProfileStore {
    dir: PathBuf,
}

impl ProfileStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// `$LAKE_CONFIG_DIR`, else `<user config dir>/lake`.
    pub fn default_dir() -> PathBuf {
        if let Some(d) = std::env::var_os("LAKE_CONFIG_DIR") {
            return PathBuf::from(d);
        }
        dirs::config_dir()
            .unwrap_or_else(|| PathBuf::from("."))
            .join("lake")
    }

    pub fn path(&self) -> PathBuf {
        self.dir.join(FILE_NAME)
    }

    fn read_all(&self) -> std::io::Result<ProfileFile> {
        match fs::read_to_string(self.path()) {
            Ok(text) => toml::from_str(&text)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(ProfileFile::default()),
            Err(e) => Err(e),
        }
    }

    pub fn load(&self, name: &str) -> std::io::Result<CliProfile> {
        Ok(self.read_all()?.profiles.remove(name).unwrap_or_default())
    }

    pub fn save(&self, name: &str, profile: &CliProfile) -> std::io::Result<()> {
        let mut all = self.read_all()?;
        all.profiles.insert(name.to_owned(), profile.clone());
        let text = toml::to_string(&all)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
        fs::create_dir_all(&self.dir)?;
        write_private(&self.path(), text.as_bytes())
    }
}

#[cfg(unix)]
fn write_private(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    use std::os::unix::fs::{OpenOptionsExt, PermissionsExt};
    let tmp = path.with_extension("tmp");
    let mut f = fs::OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(true)
        .mode(0o600)
        .open(&tmp)?;
    f.set_permissions(fs::Permissions::from_mode(0o600))?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(tmp, path)
}

#[cfg(not(unix))]
fn write_private(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::File::create(&tmp)?.write_all(bytes)?;
    fs::rename(tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_profiles_independently() {
        let dir = tempfile::tempdir().unwrap();
        let store = ProfileStore::new(dir.path());
        assert_eq!(store.load("a").unwrap(), CliProfile::default());
        let a = CliProfile {
            base_url: Some(Url::parse("http://h:1/").unwrap()),
            token: Some("t".into()),
            output: OutputMode::Json,
        };
        store.save("a", &a).unwrap();
        store.save("b", &CliProfile::default()).unwrap();
        assert_eq!(store.load("a").unwrap(), a);
        assert_eq!(store.load("b").unwrap(), CliProfile::default());
    }

    #[cfg(unix)]
    #[test]
    fn file_is_owner_only() {
        use std::os::unix::fs::PermissionsExt;
        let dir = tempfile::tempdir().unwrap();
        let store = ProfileStore::new(dir.path());
        store.save(DEFAULT_PROFILE, &CliProfile::default()).unwrap();
        let mode = fs::metadata(store.path()).unwrap().permissions().mode();
        assert_eq!(mode & 0o777, 0o600);
    }
}
