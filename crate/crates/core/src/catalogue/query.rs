//! Advanced file queries: a conjunction of exact-match predicates over a
//! fixed set of record fields.
//!
//! Queries are built either from `field=value` filter strings, as typed by
//! analysts, or through [`FileQueryBuilder`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::model::{FileCategory, FileRecord, FileStatus};
use super::page::Page;
use crate::error::{Error, FieldError, Result};
use crate::ids::CollectionId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryField {
    FileName,
    FileCategory,
    CollectionId,
    Version,
    Status,
    Bucket,
}

impl QueryField {
    pub const ALL: [QueryField; 6] = [
        QueryField::FileName,
        QueryField::FileCategory,
        QueryField::CollectionId,
        QueryField::Version,
        QueryField::Status,
        QueryField::Bucket,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QueryField::FileName => "file_name",
            QueryField::FileCategory => "file_category",
            QueryField::CollectionId => "collection_id",
            QueryField::Version => "version",
            QueryField::Status => "status",
            QueryField::Bucket => "bucket",
        }
    }
}

impl FromStr for QueryField {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        QueryField::ALL.into_iter().find(|f| f.as_str() == s).ok_or(())
    }
}

impl fmt::Display for QueryField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    FileName(String),
    FileCategory(FileCategory),
    CollectionId(CollectionId),
    Version(u32),
    Status(FileStatus),
    Bucket(String),
}

impl Predicate {
    pub fn field(&self) -> QueryField {
        match self {
            Predicate::FileName(_) => QueryField::FileName,
            Predicate::FileCategory(_) => QueryField::FileCategory,
            Predicate::CollectionId(_) => QueryField::CollectionId,
            Predicate::Version(_) => QueryField::Version,
            Predicate::Status(_) => QueryField::Status,
            Predicate::Bucket(_) => QueryField::Bucket,
        }
    }

    fn parse(field: QueryField, raw: &str) -> Result<Self, String> {
        Ok(match field {
            QueryField::FileName => Predicate::FileName(raw.to_owned()),
            QueryField::FileCategory => Predicate::FileCategory(raw.parse()?),
            QueryField::CollectionId => Predicate::CollectionId(CollectionId::from(raw)),
            QueryField::Version => match raw.parse::<u32>() {
                Ok(v) if v >= 1 => Predicate::Version(v),
                _ => return Err(format!("`{raw}` is not a positive integer version")),
            },
            QueryField::Status => Predicate::Status(raw.parse()?),
            QueryField::Bucket => Predicate::Bucket(raw.to_owned()),
        })
    }

    pub fn matches(&self, record: &FileRecord) -> bool {
        match self {
            Predicate::FileName(v) => record.file_name == *v,
            Predicate::FileCategory(c) => record.file_category == *c,
            Predicate::CollectionId(id) => record.collection_id == *id,
            Predicate::Version(v) => record.version == *v,
            Predicate::Status(s) => record.status == *s,
            Predicate::Bucket(b) => record.bucket == *b,
        }
    }
}

/// Conjunction of predicates, at most one per field. The empty query
/// matches every committed record.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FileQuery {
    predicates: BTreeMap<QueryField, Predicate>,
    pub page: Option<Page>,
}

impl FileQuery {
    pub fn builder() -> FileQueryBuilder {
        FileQueryBuilder::default()
    }

    /// Parses filter strings of the form `field=value`. Every problem is
    /// reported, each naming the offending field or token.
    pub fn parse<S: AsRef<str>>(filters: &[S]) -> Result<Self> {
        let mut builder = FileQueryBuilder::default();
        let mut errors = Vec::new();
        for token in filters {
            let token = token.as_ref();
            let Some((name, value)) = token.split_once('=') else {
                errors.push(FieldError::new(
                    "filters",
                    format!("malformed filter `{token}`: expected field=value"),
                ));
                continue;
            };
            let name = name.trim();
            let value = value.trim();
            let Ok(field) = name.parse::<QueryField>() else {
                errors.push(FieldError::new(
                    name,
                    format!(
                        "unknown query field `{name}` (allowed: {})",
                        QueryField::ALL.map(QueryField::as_str).join(", ")
                    ),
                ));
                continue;
            };
            if value.is_empty() {
                errors.push(FieldError::new(name, "value must not be empty"));
                continue;
            }
            match Predicate::parse(field, value) {
                Ok(p) => builder.push(p),
                Err(msg) => errors.push(FieldError::new(name, msg)),
            }
        }
        match builder.build() {
            Ok(q) if errors.is_empty() => Ok(q),
            Ok(_) => Err(Error::Validation(errors)),
            Err(e) => {
                errors.extend(e.field_errors().iter().cloned());
                Err(Error::Validation(errors))
            }
        }
    }

    pub fn with_page(mut self, page: Page) -> Self {
        self.page = Some(page);
        self
    }

    pub fn predicates(&self) -> impl Iterator<Item = &Predicate> {
        self.predicates.values()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn matches(&self, record: &FileRecord) -> bool {
        self.predicates.values().all(|p| p.matches(record))
    }
}

#[derive(Debug, Default)]
pub struct FileQueryBuilder {
    predicates: Vec<Predicate>,
    page: Option<Page>,
}

impl FileQueryBuilder {
    fn push(&mut self, p: Predicate) {
        self.predicates.push(p);
    }

    pub fn file_name(mut self, name: impl Into<String>) -> Self {
        self.push(Predicate::FileName(name.into()));
        self
    }

    pub fn category(mut self, category: FileCategory) -> Self {
        self.push(Predicate::FileCategory(category));
        self
    }

    pub fn collection(mut self, id: CollectionId) -> Self {
        self.push(Predicate::CollectionId(id));
        self
    }

    pub fn version(mut self, version: u32) -> Self {
        self.push(Predicate::Version(version));
        self
    }

    pub fn status(mut self, status: FileStatus) -> Self {
        self.push(Predicate::Status(status));
        self
    }

    pub fn bucket(mut self, bucket: impl Into<String>) -> Self {
        self.push(Predicate::Bucket(bucket.into()));
        self
    }

    pub fn page(mut self, page: Page) -> Self {
        self.page = Some(page);
        self
    }

    pub fn build(self) -> Result<FileQuery> {
        let mut predicates = BTreeMap::new();
        let mut errors = Vec::new();
        for p in self.predicates {
            let field = p.field();
            if let Predicate::Version(0) = p {
                errors.push(FieldError::new(field.as_str(), "versions start at 1"));
                continue;
            }
            if predicates.insert(field, p).is_some() {
                errors.push(FieldError::new(
                    field.as_str(),
                    "at most one predicate per field",
                ));
            }
        }
        if errors.is_empty() {
            Ok(FileQuery {
                predicates,
                page: self.page,
            })
        } else {
            Err(Error::Validation(errors))
        }
    }
}
