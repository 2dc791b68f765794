use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{CollectionId, FileId, UserId, VisaId};
use crate::storage::StorageType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileCategory {
    Structured,
    Unstructured,
}

impl FileCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            FileCategory::Structured => "structured",
            FileCategory::Unstructured => "unstructured",
        }
    }
}

impl FromStr for FileCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "structured" => Ok(FileCategory::Structured),
            "unstructured" => Ok(FileCategory::Unstructured),
            other => Err(format!(
                "unknown file category `{other}` (expected structured or unstructured)"
            )),
        }
    }
}

impl fmt::Display for FileCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileStatus {
    Pending,
    Committed,
}

impl FileStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FileStatus::Pending => "pending",
            FileStatus::Committed => "committed",
        }
    }
}

impl FromStr for FileStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pending" => Ok(FileStatus::Pending),
            "committed" => Ok(FileStatus::Committed),
            other => Err(format!(
                "unknown status `{other}` (expected pending or committed)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VersionOrigin {
    Auto,
    Manual,
}

/// A logical file repository bound to one storage target and one visa.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Collection {
    pub id: CollectionId,
    pub name: String,
    pub storage_type: StorageType,
    pub bucket: String,
    pub owner_id: UserId,
    pub visa_id: VisaId,
    pub created_at: DateTime<Utc>,
}

/// Metadata of one version of one file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub id: FileId,
    pub collection_id: CollectionId,
    pub file_name: String,
    pub file_category: FileCategory,
    pub bucket: String,
    pub version: u32,
    pub version_origin: VersionOrigin,
    pub storage_path: String,
    pub status: FileStatus,
    pub size_bytes: Option<u64>,
    pub checksum: Option<String>,
    pub uploaded_by: UserId,
    pub requested_at: DateTime<Utc>,
    pub committed_at: Option<DateTime<Utc>>,
}

impl FileRecord {
    pub fn is_committed(&self) -> bool {
        self.status == FileStatus::Committed
    }

    pub fn dedup_key(&self) -> DedupKey {
        DedupKey {
            file_name: self.file_name.clone(),
            collection_id: self.collection_id.clone(),
            file_category: self.file_category,
            bucket: self.bucket.clone(),
        }
    }
}

/// Identity of a file lineage across versions. Matching is exact and
/// case-sensitive on every field.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DedupKey {
    pub file_name: String,
    pub collection_id: CollectionId,
    pub file_category: FileCategory,
    pub bucket: String,
}

impl DedupKey {
    pub fn new(
        file_name: impl Into<String>,
        collection_id: CollectionId,
        file_category: FileCategory,
        bucket: impl Into<String>,
    ) -> Self {
        Self {
            file_name: file_name.into(),
            collection_id,
            file_category,
            bucket: bucket.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if let Err(e) = validate_file_name(&self.file_name) {
            errors.extend(e.field_errors().iter().cloned());
        }
        if self.collection_id.as_str().is_empty() {
            errors.push(crate::error::FieldError::new("collection_id", "must not be empty"));
        }
        if let Err(e) = validate_bucket(&self.bucket) {
            errors.extend(e.field_errors().iter().cloned());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors))
        }
    }
}

/// `<collection>/v<version>/<file>`
pub fn storage_path(collection_name: &str, version: u32, file_name: &str) -> String {
    format!("{collection_name}/v{version}/{file_name}")
}

const MAX_NAME_LEN: usize = 128;
const MAX_FILE_NAME_LEN: usize = 255;

fn path_safe(s: &str) -> bool {
    s.chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// Collection names are embedded in object paths, so they are restricted to
/// `[A-Za-z0-9._-]` and may not start with a dot.
pub fn validate_collection_name(name: &str) -> Result<()> {
    check_segment("name", name, MAX_NAME_LEN)
}

pub fn validate_bucket(bucket: &str) -> Result<()> {
    check_segment("bucket", bucket, MAX_NAME_LEN)
}

fn check_segment(field: &str, value: &str, max: usize) -> Result<()> {
    if value.is_empty() {
        return Err(Error::invalid(field, "must not be empty"));
    }
    if value.len() > max {
        return Err(Error::invalid(field, format!("must be at most {max} bytes")));
    }
    if !path_safe(value) {
        return Err(Error::invalid(
            field,
            "may only contain letters, digits, '-', '_' and '.'",
        ));
    }
    if value.starts_with('.') {
        return Err(Error::invalid(field, "must not start with '.'"));
    }
    Ok(())
}

/// File names become the last path segment: no separators, no control
/// characters, no `.`/`..`.
pub fn validate_file_name(name: &str) -> Result<()> {
    const FIELD: &str = "file_name";
    if name.trim().is_empty() {
        return Err(Error::invalid(FIELD, "must not be empty"));
    }
    if name.len() > MAX_FILE_NAME_LEN {
        return Err(Error::invalid(
            FIELD,
            format!("must be at most {MAX_FILE_NAME_LEN} bytes"),
        ));
    }
    if name.contains(['/', '\\']) {
        return Err(Error::invalid(FIELD, "must not contain path separators"));
    }
    if name.chars().any(char::is_control) {
        return Err(Error::invalid(FIELD, "must not contain control characters"));
    }
    if name == "." || name == ".." {
        return Err(Error::invalid(FIELD, "must not be a relative path component"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn storage_path_follows_collection_version_name_layout() {
        assert_eq!(
            storage_path("colA", 2, "sequences.fasta"),
            "colA/v2/sequences.fasta"
        );
    }

    #[test]
    fn collection_names_must_be_path_safe() {
        assert!(validate_collection_name("genomics_2024-v1.0").is_ok());
        for bad in ["", "a/b", "a b", "..", ".hidden", "naïve", "x\\y"] {
            assert!(validate_collection_name(bad).is_err(), "{bad:?} accepted");
        }
        assert!(validate_collection_name(&"a".repeat(129)).is_err());
    }

    #[test]
    fn file_names_reject_traversal() {
        assert!(validate_file_name("zika.csv").is_ok());
        assert!(validate_file_name("My Data (final).csv").is_ok());
        for bad in ["", "  ", "..", ".", "../etc/passwd", "a\\b", "a\u{0}b"] {
            assert!(validate_file_name(bad).is_err(), "{bad:?} accepted");
        }
    }

    #[test]
    fn enums_parse_their_wire_names() {
        assert_eq!("structured".parse(), Ok(FileCategory::Structured));
        assert!("tabular".parse::<FileCategory>().is_err());
        assert_eq!("pending".parse(), Ok(FileStatus::Pending));
        assert_eq!(
            serde_json::to_value(FileCategory::Unstructured).unwrap(),
            "unstructured"
        );
    }
}
