mod common;

use common::{World, DOLLARS};
use greenbond::reports::{anchor, list_reports, ContentId, DirStore, ReportError, ReportStore};

#[test]
fn anchors_are_listed_per_issuer_and_bond() {
    let mut w = World::new();
    let p = w.params(10, 1, 5 * DOLLARS, 100 * DOLLARS);
    let a = w.issue(p.clone());
    let b = w.issue(p);
    let issuer = w.issuer;
    let other = w.account();
    let mut store = ReportStore::new();
    let r1 = store.store(b"first");
    let r2 = store.store(b"second");
    let r3 = store.store(b"third");
    anchor(&mut w.ledger, &issuer, a.manage_app, &r1).unwrap();
    anchor(&mut w.ledger, &issuer, b.manage_app, &r2).unwrap();
    anchor(&mut w.ledger, &other, a.manage_app, &r3).unwrap();
    anchor(&mut w.ledger, &issuer, a.manage_app, &r3).unwrap();
    assert_eq!(list_reports(&w.ledger, &issuer, a.manage_app), [r1, r3.clone()]);
    assert_eq!(list_reports(&w.ledger, &issuer, b.manage_app), [r2]);
    assert_eq!(list_reports(&w.ledger, &other, a.manage_app), [r3]);
    let row = w.ledger.costs().row(&issuer, "Upload Report").unwrap();
    assert_eq!((row.fee, row.amount), (3_000, 0));
}

#[test]
fn dir_store_round_trip_and_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let store = DirStore::open(dir.path().join("reports")).unwrap();
    let cid = store.store(b"hello").unwrap();
    assert_eq!(store.store(b"hello").unwrap(), cid);
    assert_eq!(store.fetch(&cid).unwrap(), b"hello");
    std::fs::write(dir.path().join("reports").join(cid.as_str()), b"tampered").unwrap();
    assert!(matches!(store.store(b"hello"), Err(ReportError::Conflict(_))));
    let missing = ContentId::of(b"nope");
    assert!(matches!(store.fetch(&missing), Err(ReportError::Unknown(_))));
    assert!(matches!(store.store_file(&dir.path().join("absent")), Err(ReportError::Io { .. })));
}
