use super::*;
use bp7::{BundleBuilder, CreationTimestamp, EndpointId};

fn bundle(seq: u64, lifetime_micros: u64) -> Bundle {
    BundleBuilder::new("dtn:far/away".parse().unwrap(), "dtn:here".parse().unwrap())
        .creation(CreationTimestamp::new(800_000_000, seq))
        .lifetime_micros(lifetime_micros)
        .payload(vec![seq as u8; 16])
        .build()
        .unwrap()
}

fn now_for(b: &Bundle) -> u64 {
    bp7::time::dtn_time_to_unix_micros(b.primary.creation().dtn_time)
}

#[test]
fn push_starts_dispatch_pending() {
    let dir = tempfile::tempdir().unwrap();
    let store = BundleStore::open(dir.path()).unwrap();
    let b = bundle(1, 1_000_000);
    let (desc, known) = store.push(&b, now_for(&b)).unwrap();
    assert!(!known);
    assert_eq!(desc.constraints, BTreeSet::from([Constraint::DispatchPending]));
    assert_eq!(store.len(), 1);
}

#[test]
fn push_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let store = BundleStore::open(dir.path()).unwrap();
    let b = bundle(1, 1_000_000);
    store.push(&b, now_for(&b)).unwrap();
    let (_, known) = store.push(&b, now_for(&b)).unwrap();
    assert!(known);
    assert_eq!(store.len(), 1);
}

#[test]
fn query_roundtrips_and_misses() {
    let dir = tempfile::tempdir().unwrap();
    let store = BundleStore::open(dir.path()).unwrap();
    let b = bundle(2, 1_000_000);
    let key = b.id().to_string();
    store.push(&b, now_for(&b)).unwrap();
    let (loaded, desc) = store.query(&key).unwrap();
    assert_eq!(loaded, b);
    assert_eq!(desc.key, key);
    assert!(matches!(store.query("dtn:nobody-1-1"), Err(StoreError::NotFound)));
}

#[test]
fn durability_across_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let b = bundle(3, 1_000_000);
    let key = b.id().to_string();
    {
        let store = BundleStore::open(dir.path()).unwrap();
        store.push(&b, now_for(&b)).unwrap();
        store.add_sent_to(&key, "dtn:nb");
        // no clean shutdown: drop without further ceremony
    }
    let store = BundleStore::open(dir.path()).unwrap();
    let (loaded, desc) = store.query(&key).unwrap();
    assert_eq!(loaded, b);
    assert_eq!(desc.sent_to, BTreeSet::from(["dtn:nb".to_string()]));
    // still idempotent after restart
    let (_, known) = store.push(&b, now_for(&b)).unwrap();
    assert!(known);
}

#[test]
fn second_instance_is_locked_out() {
    let dir = tempfile::tempdir().unwrap();
    let _store = BundleStore::open(dir.path()).unwrap();
    assert!(matches!(BundleStore::open(dir.path()), Err(StoreError::Locked(_))));
}

#[test]
fn pending_filters_and_orders() {
    let dir = tempfile::tempdir().unwrap();
    let store = BundleStore::open(dir.path()).unwrap();
    assert!(store.pending(&[Constraint::ForwardPending]).is_empty());
    let mut keys = Vec::new();
    for seq in 0..100 {
        let b = bundle(seq, 600_000_000);
        keys.push(b.id().to_string());
        store.push(&b, now_for(&b)).unwrap();
    }
    // one bundle pushed -> listed under dispatch pending
    let listed = store.pending(&[Constraint::DispatchPending]);
    assert_eq!(listed.len(), 100);
    // insertion order is preserved
    let order: Vec<String> = listed.iter().map(|d| d.key.clone()).collect();
    assert_eq!(order, keys);
    // 40 delivered: drop their only constraint
    for key in keys.iter().take(40) {
        store.remove_constraint(key, Constraint::DispatchPending).unwrap();
    }
    assert_eq!(store.pending(&[Constraint::DispatchPending]).len(), 60);
}

#[test]
fn gc_removes_expired_and_keeps_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let store = BundleStore::open(dir.path()).unwrap();
    let b = bundle(1, 1_000_000); // 1 s lifetime
    let creation = now_for(&b);
    let key = b.id().to_string();
    store.push(&b, creation).unwrap();
    // gc at the creation instant removes nothing
    assert!(store.gc(creation).is_empty());
    assert!(store.query(&key).is_ok());
    // 2 s later the bundle is gone and a tombstone remains
    let removed = store.gc(creation + 2_000_000);
    assert_eq!(removed.len(), 1);
    assert_eq!(removed[0].1, GcCause::Expired);
    assert!(matches!(store.query(&key), Err(StoreError::NotFound)));
    assert!(store.is_known(&key));
    let (_, known) = store.push(&b, creation + 2_000_000).unwrap();
    assert!(known, "tombstone must suppress re-push");
}

#[test]
fn gc_matches_brute_force_scan() {
    let dir = tempfile::tempdir().unwrap();
    let store = BundleStore::open(dir.path()).unwrap();
    let mut expected_expired = BTreeSet::new();
    let mut base = 0;
    for seq in 0..10u64 {
        // staggered lifetimes 1..10 s
        let b = bundle(seq, (seq + 1) * 1_000_000);
        base = now_for(&b);
        if (seq + 1) * 1_000_000 < 5_500_000 {
            expected_expired.insert(b.id().to_string());
        }
        store.push(&b, base).unwrap();
    }
    // brute-force oracle: every descriptor with expiry < now, nothing else
    let now = base + 5_500_000;
    let oracle: BTreeSet<String> = store
        .pending(&[Constraint::DispatchPending])
        .into_iter()
        .filter(|d| d.expiry_unix_micros <= now)
        .map(|d| d.key)
        .collect();
    assert_eq!(oracle, expected_expired);
    let removed: BTreeSet<String> =
        store.gc(now).into_iter().map(|(id, _)| id.to_string()).collect();
    assert_eq!(removed, expected_expired);
    assert_eq!(store.len(), 10 - expected_expired.len());
}

#[test]
fn drained_descriptors_are_reaped_and_tombstoned() {
    let dir = tempfile::tempdir().unwrap();
    let store = BundleStore::open(dir.path()).unwrap();
    let b = bundle(4, 600_000_000);
    let key = b.id().to_string();
    let now = now_for(&b);
    store.push(&b, now).unwrap();
    store.remove_constraint(&key, Constraint::DispatchPending).unwrap();
    let removed = store.gc(now + 1);
    assert_eq!(removed.len(), 1);
    assert_eq!(removed[0].1, GcCause::Drained);
    assert!(store.is_known(&key));
}

#[test]
fn deleted_is_terminal() {
    let dir = tempfile::tempdir().unwrap();
    let store = BundleStore::open(dir.path()).unwrap();
    let b = bundle(5, 600_000_000);
    let key = b.id().to_string();
    let now = now_for(&b);
    store.push(&b, now).unwrap();
    store.delete(&key, now).unwrap();
    // updates on a deleted bundle are silently dropped, never resurrected
    assert!(!store.add_sent_to(&key, "dtn:nb"));
    assert!(matches!(store.query(&key), Err(StoreError::NotFound)));
}

#[test]
fn fsck_passes_on_clean_store_and_reaps_orphans() {
    let dir = tempfile::tempdir().unwrap();
    let store = BundleStore::open(dir.path()).unwrap();
    let b = bundle(6, 600_000_000);
    store.push(&b, now_for(&b)).unwrap();
    // drop unindexed garbage into the bundle dir: a temp and an orphan
    std::fs::write(dir.path().join(BUNDLE_SUBDIR).join("junk.tmp"), b"x").unwrap();
    std::fs::write(dir.path().join(BUNDLE_SUBDIR).join("feed.bundle"), b"y").unwrap();
    let report = store.fsck().unwrap();
    assert!(report.passed());
    assert_eq!(report.checked, 1);
    assert_eq!(report.orphans_reaped, 2);
}

#[test]
fn corrupt_file_is_quarantined_not_returned() {
    let dir = tempfile::tempdir().unwrap();
    let store = BundleStore::open(dir.path()).unwrap();
    let b = bundle(7, 600_000_000);
    let key = b.id().to_string();
    store.push(&b, now_for(&b)).unwrap();
    let file = dir.path().join(BUNDLE_SUBDIR).join(BundleStore::file_name_for(&key));
    std::fs::write(&file, b"garbage").unwrap();
    assert!(matches!(store.query(&key), Err(StoreError::Corrupt { .. })));
    // quarantined: subsequent queries see not-found, never bad data
    assert!(matches!(store.query(&key), Err(StoreError::NotFound)));
}

#[test]
fn torn_index_tail_drops_only_the_torn_entry() {
    let dir = tempfile::tempdir().unwrap();
    let b1 = bundle(8, 600_000_000);
    let b2 = bundle(9, 600_000_000);
    {
        let store = BundleStore::open(dir.path()).unwrap();
        store.push(&b1, now_for(&b1)).unwrap();
        store.push(&b2, now_for(&b2)).unwrap();
    }
    // simulate a crash mid-append: truncate the log inside the last line
    let log = dir.path().join("index.log");
    let text = std::fs::read_to_string(&log).unwrap();
    let cut = text.len() - 10;
    std::fs::write(&log, &text[..cut]).unwrap();
    let store = BundleStore::open(dir.path()).unwrap();
    // first bundle survives; second became an orphan and was reaped
    assert!(store.query(&b1.id().to_string()).is_ok());
    assert!(matches!(store.query(&b2.id().to_string()), Err(StoreError::NotFound)));
    assert!(store.fsck().unwrap().passed());
}

#[test]
fn unindexed_file_from_crash_is_reaped_on_open() {
    let dir = tempfile::tempdir().unwrap();
    let b = bundle(10, 600_000_000);
    {
        let store = BundleStore::open(dir.path()).unwrap();
        store.push(&b, now_for(&b)).unwrap();
        // simulate "file written, index append lost": wipe the log entirely
        std::fs::write(dir.path().join("index.log"), b"").unwrap();
    }
    let store = BundleStore::open(dir.path()).unwrap();
    assert_eq!(store.len(), 0);
    assert!(store.fsck().unwrap().passed());
    let listing: Vec<_> =
        std::fs::read_dir(dir.path().join(BUNDLE_SUBDIR)).unwrap().collect();
    assert!(listing.is_empty(), "orphan should have been reaped");
}

#[test]
fn expiry_for_clockless_bundles_uses_receipt_and_age() {
    let dir = tempfile::tempdir().unwrap();
    let store = BundleStore::open(dir.path()).unwrap();
    // clockless creation with 2 s lifetime and 0.5 s of accumulated age
    let mut b = BundleBuilder::new(EndpointId::dtn("far").unwrap(), EndpointId::Null)
        .lifetime_micros(2_000_000)
        .payload(vec![1])
        .build()
        .unwrap();
    b.set_bundle_age(500_000);
    let receipt = 1_700_000_000_000_000u64;
    let (desc, _) = store.push(&b, receipt).unwrap();
    assert_eq!(desc.expiry_unix_micros, receipt + 1_500_000);
}
