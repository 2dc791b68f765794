//! Version ledger per dedup key.
//!
//! Each lineage document maps every version currently held by a record
//! (pending or committed) to that record's id. Registration swaps the
//! ledger and inserts the record in one conditional batch, which makes
//! version assignment linearizable per key.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::{DedupKey, VersionOrigin};
use crate::error::{Error, Result};
use crate::ids::FileId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Lineage {
    pub key: DedupKey,
    pub versions: BTreeMap<u32, FileId>,
}

impl Lineage {
    pub fn empty(key: DedupKey) -> Self {
        Self {
            key,
            versions: BTreeMap::new(),
        }
    }
}

pub(crate) fn lineage_key(key: &DedupKey) -> String {
    let mut h = Sha256::new();
    for part in [
        key.collection_id.as_str(),
        key.bucket.as_str(),
        key.file_category.as_str(),
        key.file_name.as_str(),
    ] {
        h.update((part.len() as u64).to_be_bytes());
        h.update(part.as_bytes());
    }
    hex::encode(h.finalize())
}

/// Next version for a lineage: one past the highest held version when
/// none is requested, otherwise the requested one if it is free.
pub(crate) fn choose_version(
    held: &BTreeMap<u32, FileId>,
    requested: Option<u32>,
) -> Result<(u32, VersionOrigin)> {
    match requested {
        None => {
            let max = held.keys().next_back().copied().unwrap_or(0);
            let next = max
                .checked_add(1)
                .ok_or_else(|| Error::conflict("version space exhausted for this file"))?;
            Ok((next, VersionOrigin::Auto))
        }
        Some(0) => Err(Error::invalid("version", "versions start at 1")),
        Some(v) if held.contains_key(&v) => Err(Error::conflict(format!(
            "version {v} already exists for this file"
        ))),
        Some(v) => Ok((v, VersionOrigin::Manual)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalogue::FileCategory;
    use crate::ids::CollectionId;

    fn held(vs: &[u32]) -> BTreeMap<u32, FileId> {
        vs.iter().map(|v| (*v, FileId::generate())).collect()
    }

    #[test]
    fn auto_is_one_past_max_even_with_gaps() {
        assert_eq!(choose_version(&held(&[]), None).unwrap().0, 1);
        assert_eq!(choose_version(&held(&[1]), None).unwrap().0, 2);
        assert_eq!(choose_version(&held(&[1, 2, 7]), None).unwrap().0, 8);
    }

    #[test]
    fn manual_fills_gaps_but_never_collides() {
        let h = held(&[1, 2]);
        assert_eq!(
            choose_version(&h, Some(7)).unwrap(),
            (7, VersionOrigin::Manual)
        );
        assert!(matches!(choose_version(&h, Some(2)), Err(Error::Conflict(_))));
        assert!(matches!(choose_version(&h, Some(0)), Err(Error::Validation(_))));
    }

    #[test]
    fn lineage_keys_separate_every_field() {
        let base = DedupKey::new("a", CollectionId::from("c"), FileCategory::Structured, "b");
        let mut other = base.clone();
        other.file_category = FileCategory::Unstructured;
        assert_ne!(lineage_key(&base), lineage_key(&other));
        // length-prefixing keeps ("ab","c") and ("a","bc") apart
        let k1 = DedupKey::new("x", CollectionId::from("ab"), FileCategory::Structured, "c");
        let k2 = DedupKey::new("x", CollectionId::from("a"), FileCategory::Structured, "bc");
        assert_ne!(lineage_key(&k1), lineage_key(&k2));
    }
}
