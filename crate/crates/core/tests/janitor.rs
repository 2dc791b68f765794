mod common;

use std::sync::Arc;

use bytes::Bytes;
use chrono::Duration;
use common::*;
use lakehouse::catalogue::{DedupKey, FileCategory};
use lakehouse::governance::Role;
use lakehouse::janitor::SweepReport;
use lakehouse::storage::StorageType;
use proptest::prelude::*;

fn ttl() -> Duration {
    Duration::minutes(15)
}

#[derive(Debug, Clone, Copy)]
enum Fate {
    Skip,
    Upload,
    UploadAndCommit,
}

fn fate() -> impl Strategy<Value = Fate> {
    prop_oneof![Just(Fate::Skip), Just(Fate::Upload), Just(Fate::UploadAndCommit)]
}

struct Trace {
    local: Local,
    eager: usize,
    uploaded: usize,
    tickets: usize,
}

async fn play(fates: &[Fate]) -> Trace {
    let local = Local::new(ttl());
    let col = local.collection(&local.admin, "trace");
    let mut eager = 0;
    let mut uploaded = 0;
    for (i, f) in fates.iter().enumerate() {
        let t = local.request(&local.admin, &col, &format!("f{}.csv", i % 7));
        match f {
            Fate::Skip => {}
            Fate::Upload | Fate::UploadAndCommit => {
                local
                    .lake
                    .files()
                    .redeem_upload(&t.ticket_id, Bytes::from(format!("payload {i}")))
                    .await
                    .unwrap();
                uploaded += 1;
                if matches!(f, Fate::UploadAndCommit) {
                    local.lake.files().commit(&local.admin, &t.file_id, None).await.unwrap();
                    eager += 1;
                }
            }
        }
    }
    Trace {
        local,
        eager,
        uploaded,
        tickets: fates.len(),
    }
}

fn total(reports: &[SweepReport]) -> SweepReport {
    reports.iter().fold(SweepReport::default(), |a, r| SweepReport {
        committed: a.committed + r.committed,
        purged: a.purged + r.purged,
        skipped: a.skipped + r.skipped,
        deferred: a.deferred + r.deferred,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sweeps_converge_to_a_bijection(fates in prop::collection::vec(fate(), 0..30), early in 0usize..3) {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async {
            let tr = play(&fates).await;
            let j = tr.local.lake.janitor();
            let mut reports = Vec::new();
            // Sweeps before expiry touch nothing.
            for _ in 0..early {
                let r = j.sweep().await.unwrap();
                prop_assert_eq!((r.committed, r.purged), (0, 0));
                reports.push(r);
            }
            let committed_before = tr.local.committed_paths();
            tr.local.clock.advance(ttl() + ttl() + Duration::seconds(1));
            let r = j.sweep().await.unwrap();
            prop_assert_eq!(r.committed, tr.uploaded - tr.eager);
            prop_assert_eq!(r.purged, tr.tickets - tr.uploaded);
            prop_assert_eq!((r.skipped, r.deferred), (0, 0));
            reports.push(r);
            for _ in 0..2 {
                let again = j.sweep().await.unwrap();
                prop_assert_eq!(again, SweepReport::default());
                reports.push(again);
            }
            let t = total(&reports);
            prop_assert_eq!(t.committed + t.purged + tr.eager, tr.tickets);

            let committed = tr.local.committed_paths();
            prop_assert!(committed_before.is_subset(&committed));
            prop_assert_eq!(committed.len(), tr.uploaded);
            prop_assert_eq!(committed, tr.local.stored_paths().await);
            prop_assert!(j.reconcile_full().await.unwrap().is_clean());
            Ok(())
        })?;
    }
}

#[tokio::test]
async fn unexpired_and_in_grace_entries_are_skipped() {
    let local = Local::new(ttl());
    let col = local.collection(&local.admin, "c");
    local.request(&local.admin, &col, "a");
    let j = local.lake.janitor();
    assert_eq!(j.sweep().await.unwrap().skipped, 1);
    local.clock.advance(ttl() + Duration::seconds(1));
    assert_eq!(j.sweep().await.unwrap().skipped, 1, "inside the grace window");
    local.clock.advance(ttl());
    assert_eq!(j.sweep().await.unwrap().purged, 1);
}

#[tokio::test]
async fn late_object_inside_grace_is_committed() {
    let local = Local::new(ttl());
    let col = local.collection(&local.admin, "c");
    let t = local.request(&local.admin, &col, "a");
    // Written straight to the bucket after the ticket expired, as a slow
    // direct upload to a remote backend would be.
    local.clock.advance(ttl() + Duration::minutes(1));
    let backend = local.lake.storage().backend(StorageType::Local, BUCKET).unwrap();
    let path = lakehouse::storage::ObjectPath::parse(t.storage_path.clone()).unwrap();
    backend.put(&path, Bytes::from_static(b"late")).await.unwrap();
    let r = local.lake.janitor().sweep().await.unwrap();
    assert_eq!(r.committed, 1);
    assert_eq!(local.lake.catalogue().file(&t.file_id).unwrap().size_bytes, Some(4));
}

#[tokio::test]
async fn concurrent_eager_commits_and_sweeps_settle_each_entry_once() {
    let local = Local::new(ttl());
    let col = local.collection(&local.admin, "c");
    let mut tickets = Vec::new();
    for i in 0..40 {
        let t = local.request(&local.admin, &col, &format!("f{i}"));
        local
            .lake
            .files()
            .redeem_upload(&t.ticket_id, Bytes::from_static(b"x"))
            .await
            .unwrap();
        tickets.push(t);
    }
    local.clock.advance(ttl() + Duration::seconds(1));
    let lake = local.lake.clone();
    let admin = local.admin.clone();
    let eager = tokio::spawn(async move {
        for t in &tickets {
            lake.files().commit(&admin, &t.file_id, None).await.unwrap();
        }
    });
    let mut swept = 0;
    for _ in 0..4 {
        swept += local.lake.janitor().sweep().await.unwrap().committed;
        tokio::task::yield_now().await;
    }
    eager.await.unwrap();
    swept += local.lake.janitor().sweep().await.unwrap().committed;
    assert!(swept <= 40);
    assert_eq!(local.committed_paths().len(), 40);
    assert_eq!(local.committed_paths(), local.stored_paths().await);
}

#[tokio::test]
async fn sweep_never_touches_committed_records_or_their_objects() {
    let local = Local::new(ttl());
    let col = local.collection(&local.admin, "c");
    let t = local.request(&local.admin, &col, "keep");
    local
        .lake
        .files()
        .redeem_upload(&t.ticket_id, Bytes::from_static(b"keep"))
        .await
        .unwrap();
    local.lake.files().commit(&local.admin, &t.file_id, None).await.unwrap();
    local.clock.advance(Duration::days(30));
    for _ in 0..3 {
        local.lake.janitor().sweep().await.unwrap();
        local.lake.janitor().reconcile_full().await.unwrap();
    }
    assert!(local.lake.catalogue().file(&t.file_id).unwrap().is_committed());
    assert_eq!(local.stored_paths().await.len(), 1);
}

#[tokio::test]
async fn reconcile_purges_injected_ghost_records() {
    let local = Local::new(ttl());
    let col = local.collection(&local.admin, "c");
    // Ghosts: pending records with neither a ticket nor a queue entry.
    for i in 0..5 {
        let key = DedupKey::new(format!("ghost{i}"), col.id.clone(), FileCategory::Unstructured, BUCKET);
        local.lake.catalogue().register_file(&key, &local.admin.user_id, None).unwrap();
    }
    assert!(local.lake.janitor().reconcile_full().await.unwrap().purged.is_empty());
    local.clock.advance(ttl() + ttl() + Duration::seconds(1));
    let report = local.lake.janitor().reconcile_full().await.unwrap();
    assert_eq!(report.purged.len(), 5);
    assert!(report.flagged.is_empty() && report.orphans.is_empty());
    assert!(local.lake.janitor().reconcile_full().await.unwrap().is_clean());
}

#[tokio::test]
async fn reconcile_reports_orphans_and_flags_missing_objects() {
    let local = Local::new(ttl());
    let col = local.collection(&local.admin, "c");
    let t = local.request(&local.admin, &col, "a");
    local
        .lake
        .files()
        .redeem_upload(&t.ticket_id, Bytes::from_static(b"a"))
        .await
        .unwrap();
    local.lake.files().commit(&local.admin, &t.file_id, None).await.unwrap();
    let backend = local.lake.storage().backend(StorageType::Local, BUCKET).unwrap();
    backend
        .delete(&lakehouse::storage::ObjectPath::parse(t.storage_path.clone()).unwrap())
        .await
        .unwrap();
    backend
        .put(&lakehouse::storage::ObjectPath::parse("stray/v1/x").unwrap(), Bytes::from_static(b"x"))
        .await
        .unwrap();
    let report = local.lake.janitor().reconcile_full().await.unwrap();
    assert_eq!(report.flagged.len(), 1);
    assert_eq!(report.flagged[0].file_id, t.file_id);
    assert_eq!(report.orphans.len(), 1);
    assert_eq!(report.orphans[0].path, "stray/v1/x");
    // Reconcile reports; it does not delete committed data.
    assert!(local.lake.catalogue().file(&t.file_id).unwrap().is_committed());
}

#[tokio::test]
async fn unconfigured_remote_targets_are_listed_as_unchecked() {
    let local = Local::new(ttl());
    let cred = local
        .lake
        .credentials()
        .add(
            &local.admin,
            StorageType::S3Compatible,
            "s3",
            &lakehouse::governance::SecretBytes::new(b"k:s".to_vec()),
        )
        .unwrap();
    local
        .lake
        .credentials()
        .register_target(&local.admin, StorageType::S3Compatible, "remote", Some(&cred.credential_id))
        .unwrap();
    let report = local.lake.janitor().reconcile_full().await.unwrap();
    assert_eq!(report.unchecked_targets, ["s3-compatible/remote"]);
}

#[tokio::test]
async fn sweep_via_service_requires_a_data_manager() {
    let local = Local::new(ttl());
    let publisher = local.user("pub", Role::Publisher);
    let err = local.lake.sweep(&publisher).await.unwrap_err();
    assert_eq!(err.code(), lakehouse::ErrorCode::Forbidden);
    assert_eq!(local.lake.sweep(&local.admin).await.unwrap(), SweepReport::default());
}

#[tokio::test]
async fn interval_sweeps_run_in_the_background() {
    let local = Local::new(ttl());
    let col = local.collection(&local.admin, "c");
    local.request(&local.admin, &col, "a");
    local.clock.advance(Duration::hours(1));
    let handle = Arc::clone(local.lake.janitor()).spawn_interval(std::time::Duration::from_millis(20));
    let settled = || {
        local
            .lake
            .janitor()
            .queue()
            .unwrap()
            .iter()
            .all(|e| e.state == lakehouse::janitor::QueueState::Settled)
    };
    for _ in 0..100 {
        if settled() {
            break;
        }
        tokio::time::sleep(std::time::Duration::from_millis(20)).await;
    }
    handle.abort();
    assert!(settled());
}
