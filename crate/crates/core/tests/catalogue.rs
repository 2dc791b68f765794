mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::Duration;
use common::*;
use lakehouse::catalogue::{
    storage_path, Collection, DedupKey, FileCategory, FileQuery, FileRecord, FileStatus, Page,
};
use lakehouse::governance::Role;
use lakehouse::ids::FileId;
use lakehouse::storage::StorageType;
use lakehouse::ErrorCode;
use proptest::prelude::*;

fn ttl() -> Duration {
    Duration::minutes(15)
}

const NAMES: [&str; 3] = ["a.csv", "b.csv", "A.csv"];

#[derive(Debug, Clone, Copy)]
enum Op {
    Register(usize, Option<u32>),
    Commit(usize, usize),
    Purge(usize, usize),
}

fn op() -> impl Strategy<Value = Op> {
    let key = 0..NAMES.len();
    prop_oneof![
        3 => (key.clone(), prop::option::weighted(0.3, 1u32..8)).prop_map(|(k, v)| Op::Register(k, v)),
        1 => (key.clone(), any::<usize>()).prop_map(|(k, i)| Op::Commit(k, i)),
        1 => (key, any::<usize>()).prop_map(|(k, i)| Op::Purge(k, i)),
    ]
}

type Lineage = BTreeMap<u32, (FileId, bool)>;

fn key(col: &Collection, k: usize) -> DedupKey {
    DedupKey::new(NAMES[k], col.id.clone(), FileCategory::Structured, BUCKET)
}

fn nth(lineage: &Lineage, i: usize) -> Option<(u32, FileId, bool)> {
    if lineage.is_empty() {
        return None;
    }
    let (v, (id, c)) = lineage.iter().nth(i % lineage.len())?;
    Some((*v, id.clone(), *c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn versions_follow_the_lineage_model(ops in prop::collection::vec(op(), 1..40)) {
        let local = Local::new(ttl());
        let col = local.collection(&local.admin, "trial");
        let cat = local.lake.catalogue();
        let mut model: Vec<Lineage> = vec![Lineage::new(); NAMES.len()];
        for o in ops {
            match o {
                Op::Register(k, requested) => {
                    let lin = &mut model[k];
                    let expected = match requested {
                        Some(v) if lin.contains_key(&v) => None,
                        Some(v) => Some(v),
                        None => Some(lin.keys().next_back().map_or(1, |m| m + 1)),
                    };
                    let preview = cat.resolve_version(&key(&col, k), requested);
                    let got = cat.register_file(&key(&col, k), &local.admin.user_id, requested);
                    match expected {
                        None => {
                            prop_assert_eq!(got.unwrap_err().code(), ErrorCode::Conflict);
                            prop_assert_eq!(preview.unwrap_err().code(), ErrorCode::Conflict);
                        }
                        Some(v) => {
                            let r = got.unwrap();
                            prop_assert_eq!(preview.unwrap().version, v);
                            prop_assert_eq!(r.version, v);
                            prop_assert_eq!(&r.storage_path, &format!("trial/v{v}/{}", NAMES[k]));
                            prop_assert_eq!(r.status, FileStatus::Pending);
                            lin.insert(v, (r.id, false));
                        }
                    }
                }
                Op::Commit(k, i) => {
                    let Some((v, id, _)) = nth(&model[k], i) else { continue };
                    let out = cat.commit_file(&id, 1, None).unwrap();
                    prop_assert_eq!(out.record.version, v);
                    model[k].insert(v, (id, true));
                }
                Op::Purge(k, i) => {
                    let Some((v, id, committed)) = nth(&model[k], i) else { continue };
                    let purged = cat.purge_pending(&id).unwrap();
                    prop_assert_eq!(purged.is_some(), !committed);
                    if !committed {
                        model[k].remove(&v);
                    }
                }
            }
        }
        // The store agrees with the model record for record.
        let mut seen = BTreeSet::new();
        for (k, lin) in model.iter().enumerate() {
            for (v, (id, committed)) in lin {
                let r = cat.file(id).unwrap();
                prop_assert_eq!((r.version, r.is_committed()), (*v, *committed));
                prop_assert_eq!(&r.dedup_key(), &key(&col, k));
                prop_assert_eq!(&r.storage_path, &storage_path(&col.name, r.version, &r.file_name));
                prop_assert!(seen.insert(r.storage_path.clone()));
            }
        }
        let committed = cat.list_files(&col.id, None).unwrap();
        prop_assert_eq!(committed.total, model.iter().flat_map(|l| l.values()).filter(|(_, c)| *c).count());
    }

    #[test]
    fn searches_match_a_linear_scan(
        records in prop::collection::vec((0usize..4, 0usize..2, 0usize..3, any::<bool>()), 0..30),
        keyword in "[a-dA-D]{1,2}",
        filter in (prop::option::of(0usize..4), prop::option::of(0usize..2), prop::option::of(0usize..3), prop::option::of(1u32..4)),
    ) {
        const STEMS: [&str; 4] = ["alpha", "Beta", "cadd", "dab"];
        const CATS: [FileCategory; 2] = [FileCategory::Structured, FileCategory::Unstructured];
        let local = Local::new(ttl());
        let cols: Vec<Collection> = (0..3).map(|i| local.collection(&local.admin, &format!("c{i}"))).collect();
        let cat = local.lake.catalogue();
        let mut all: Vec<FileRecord> = Vec::new();
        for (stem, category, c, commit) in records {
            let k = DedupKey::new(format!("{}.dat", STEMS[stem]), cols[c].id.clone(), CATS[category], BUCKET);
            let r = cat.register_file(&k, &local.admin.user_id, None).unwrap();
            all.push(if commit { cat.commit_file(&r.id, 3, None).unwrap().record } else { r });
        }
        let ids = |rs: Vec<FileRecord>| rs.into_iter().map(|r| r.id).collect::<BTreeSet<_>>();

        let needle = keyword.to_lowercase();
        let expected = ids(all.iter().filter(|r| r.is_committed() && r.file_name.to_lowercase().contains(&needle)).cloned().collect());
        prop_assert_eq!(ids(cat.basic_search(&keyword, None).unwrap().items), expected);

        let (stem, category, c, version) = filter;
        let mut filters = Vec::new();
        if let Some(s) = stem { filters.push(format!("file_name={}.dat", STEMS[s])); }
        if let Some(x) = category { filters.push(format!("file_category={}", CATS[x].as_str())); }
        if let Some(c) = c { filters.push(format!("collection_id={}", cols[c].id)); }
        if let Some(v) = version { filters.push(format!("version={v}")); }
        let query = FileQuery::parse(&filters).unwrap();
        let expected = ids(all.iter().filter(|r| {
            r.is_committed()
                && stem.is_none_or(|s| r.file_name == format!("{}.dat", STEMS[s]))
                && category.is_none_or(|x| r.file_category == CATS[x])
                && c.is_none_or(|c| r.collection_id == cols[c].id)
                && version.is_none_or(|v| r.version == v)
        }).cloned().collect());
        let hits = cat.advanced_search(&query).unwrap();
        prop_assert!(hits.items.iter().all(|r| r.status == FileStatus::Committed));
        prop_assert_eq!(ids(hits.items), expected);
    }
}

#[test]
fn concurrent_registrations_never_share_a_version() {
    let local = Local::new(ttl());
    let col = local.collection(&local.admin, "busy");
    let lake = Arc::clone(&local.lake);
    let k = key(&col, 0);
    let threads: Vec<_> = (0..8)
        .map(|_| {
            let lake = Arc::clone(&lake);
            let k = k.clone();
            let who = local.admin.user_id.clone();
            std::thread::spawn(move || {
                (0..25)
                    .map(|_| lake.catalogue().register_file(&k, &who, None).unwrap().version)
                    .collect::<Vec<_>>()
            })
        })
        .collect();
    let mut versions: Vec<u32> = threads.into_iter().flat_map(|t| t.join().unwrap()).collect();
    versions.sort_unstable();
    assert_eq!(versions, (1..=200).collect::<Vec<_>>());
}

#[test]
fn lineages_are_case_sensitive_and_scoped_by_category() {
    let local = Local::new(ttl());
    let col = local.collection(&local.admin, "c");
    let cat = local.lake.catalogue();
    let who = &local.admin.user_id;
    let v = |name: &str, category| {
        cat.register_file(&DedupKey::new(name, col.id.clone(), category, BUCKET), who, None)
            .unwrap()
            .version
    };
    assert_eq!(v("data.csv", FileCategory::Structured), 1);
    assert_eq!(v("data.csv", FileCategory::Structured), 2);
    assert_eq!(v("Data.csv", FileCategory::Structured), 1);
    assert_eq!(v("data.csv", FileCategory::Unstructured), 1);
}

#[test]
fn pending_versions_still_count_toward_the_next_one() {
    let local = Local::new(ttl());
    let col = local.collection(&local.admin, "c");
    let cat = local.lake.catalogue();
    let k = key(&col, 0);
    cat.register_file(&k, &local.admin.user_id, Some(4)).unwrap();
    assert_eq!(cat.resolve_version(&k, None).unwrap().version, 5);
    assert_eq!(cat.resolve_version(&k, Some(2)).unwrap().version, 2);
    assert_eq!(cat.register_file(&k, &local.admin.user_id, None).unwrap().version, 5);
}

#[test]
fn collection_names_are_unique_per_target() {
    let local = Local::new(ttl());
    local
        .lake
        .storage()
        .register_target(StorageType::Local, "other", None, None)
        .unwrap();
    let p = local.user("pub", Role::Publisher);
    let catalog = local.lake.catalog();
    catalog.create_collection(&p, "zika", StorageType::Local, BUCKET).unwrap();
    let dup = catalog.create_collection(&local.admin, "zika", StorageType::Local, BUCKET).unwrap_err();
    assert_eq!(dup.code(), ErrorCode::Conflict);
    catalog.create_collection(&p, "zika", StorageType::Local, "other").unwrap();
    let consumer = local.user("con", Role::Consumer);
    let denied = catalog.create_collection(&consumer, "mine", StorageType::Local, BUCKET).unwrap_err();
    assert_eq!(denied.code(), ErrorCode::Forbidden);
    let missing = catalog.create_collection(&p, "x", StorageType::Local, "nowhere").unwrap_err();
    assert_eq!(missing.code(), ErrorCode::NotFound);
}

#[test]
fn collection_names_must_be_path_safe() {
    let local = Local::new(ttl());
    for bad in ["", "a/b", "..", ".hidden", "sp ace"] {
        let err = local
            .lake
            .catalog()
            .create_collection(&local.admin, bad, StorageType::Local, BUCKET)
            .unwrap_err();
        assert_eq!(err.code(), ErrorCode::Validation, "{bad:?}");
    }
}

#[test]
fn listings_paginate_a_stable_order() {
    let local = Local::new(ttl());
    for i in 0..7 {
        local.collection(&local.admin, &format!("col{i}"));
    }
    let cat = local.lake.catalogue();
    let all: Vec<String> = cat.list_collections(None).unwrap().items.into_iter().map(|c| c.name).collect();
    assert_eq!(all, (0..7).map(|i| format!("col{i}")).collect::<Vec<_>>());
    let page = cat.list_collections(Some(Page::new(Some(5), Some(5)).unwrap())).unwrap();
    assert_eq!((page.total, page.items.len()), (7, 2));
    assert_eq!(Page::new(None, Some(0)).unwrap_err().code(), ErrorCode::Validation);
}

#[test]
fn bad_queries_name_every_offending_field() {
    let err = FileQuery::parse(&["colour=red", "version=0", "status=lost", "nonsense"]).unwrap_err();
    let fields: BTreeSet<&str> = err.field_errors().iter().map(|f| f.field.as_str()).collect();
    assert_eq!(fields, BTreeSet::from(["colour", "version", "status", "filters"]));
    let local = Local::new(ttl());
    assert_eq!(
        local.lake.catalogue().basic_search("  ", None).unwrap_err().code(),
        ErrorCode::Validation
    );
}
