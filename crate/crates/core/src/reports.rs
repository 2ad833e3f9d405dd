//! Report documents: a local content-addressed store plus on-ledger anchors.
//!
//! The issuer stores a report, then sends a zero-amount payment to itself
//! whose note is `<manage app id>+<content id>`. Anyone can list a bond's
//! reports by scanning the issuer's transactions for that prefix.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::greenbond::labels;
use crate::ledger::{Address, AppId, Ledger, MicroAlgos, Rejection, Transaction, TransactionGroup, TxnKind, MAX_NOTE_BYTES};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("unknown content id {0}")]
    Unknown(ContentId),
    #[error("invalid content id {0:?}")]
    BadContentId(String),
    #[error("invalid report note {0:?}")]
    BadNote(String),
    #[error("note of {0} bytes exceeds the 1024-byte limit")]
    NoteTooLarge(usize),
    #[error("content id {0} already stored with different bytes")]
    Conflict(ContentId),
    #[error(transparent)]
    Rejected(#[from] Rejection),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Lowercase hex SHA-256 of a document.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ContentId(String);

impl ContentId {
    pub fn of(bytes: &[u8]) -> Self {
        Self(hex::encode(Sha256::digest(bytes)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ContentId {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let ok = s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        if ok {
            Ok(Self(s.to_owned()))
        } else {
            Err(ReportError::BadContentId(s.to_owned()))
        }
    }
}

/// Anchor note `<manage app id>+<content id>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportNote {
    pub manage_app: AppId,
    pub cid: ContentId,
}

impl ReportNote {
    pub fn render(&self) -> String {
        format!("{}+{}", self.manage_app.0, self.cid)
    }

    pub fn parse(note: &[u8]) -> Result<Self, ReportError> {
        let bad = || ReportError::BadNote(String::from_utf8_lossy(note).into_owned());
        let text = std::str::from_utf8(note).map_err(|_| bad())?;
        let (app, cid) = text.split_once('+').ok_or_else(bad)?;
        if app.is_empty() || !app.bytes().all(|b| b.is_ascii_digit()) || (app.len() > 1 && app.starts_with('0')) {
            return Err(bad());
        }
        Ok(Self {
            manage_app: AppId(app.parse().map_err(|_| bad())?),
            cid: cid.parse().map_err(|_| bad())?,
        })
    }
}

/// In-memory content-addressed store.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReportStore {
    docs: BTreeMap<ContentId, Vec<u8>>,
}

impl ReportStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn store(&mut self, bytes: &[u8]) -> ContentId {
        let cid = ContentId::of(bytes);
        self.docs.entry(cid.clone()).or_insert_with(|| bytes.to_vec());
        cid
    }

    pub fn fetch(&self, cid: &ContentId) -> Result<&[u8], ReportError> {
        self.docs.get(cid).map(Vec::as_slice).ok_or_else(|| ReportError::Unknown(cid.clone()))
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

/// A store kept on disk, one file per content id.
#[derive(Clone, Debug)]
pub struct DirStore {
    root: PathBuf,
}

impl DirStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ReportError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|source| ReportError::Io { path: root.clone(), source })?;
        Ok(Self { root })
    }

    fn path(&self, cid: &ContentId) -> PathBuf {
        self.root.join(cid.as_str())
    }

    pub fn store(&self, bytes: &[u8]) -> Result<ContentId, ReportError> {
        let cid = ContentId::of(bytes);
        let path = self.path(&cid);
        match fs::read(&path) {
            Ok(existing) if existing == bytes => return Ok(cid),
            Ok(_) => return Err(ReportError::Conflict(cid)),
            Err(_) => {}
        }
        fs::write(&path, bytes).map_err(|source| ReportError::Io { path, source })?;
        Ok(cid)
    }

    pub fn store_file(&self, file: &Path) -> Result<ContentId, ReportError> {
        let bytes = fs::read(file).map_err(|source| ReportError::Io { path: file.to_owned(), source })?;
        self.store(&bytes)
    }

    pub fn fetch(&self, cid: &ContentId) -> Result<Vec<u8>, ReportError> {
        fs::read(self.path(cid)).map_err(|_| ReportError::Unknown(cid.clone()))
    }
}

/// The zero-amount self-payment that anchors `cid` for a bond.
pub fn anchor_txn(issuer: Address, manage_app: AppId, cid: &ContentId, now: u64) -> Result<Transaction, ReportError> {
    let note = ReportNote { manage_app, cid: cid.clone() }.render();
    if note.len() > MAX_NOTE_BYTES {
        return Err(ReportError::NoteTooLarge(note.len()));
    }
    Ok(Transaction::payment(issuer, issuer, MicroAlgos::ZERO, now).with_note(note))
}

/// Submits the anchor for `cid`; its fee is recorded as "Upload Report".
pub fn anchor(ledger: &mut Ledger, issuer: &Address, manage_app: AppId, cid: &ContentId) -> Result<(), ReportError> {
    let txn = anchor_txn(*issuer, manage_app, cid, ledger.now())?;
    ledger.submit_group_as(&TransactionGroup::single(txn), &labels::UPLOAD_REPORT.into())?;
    Ok(())
}

/// Content ids anchored by `issuer` for `manage_app`, in ledger order.
pub fn list_reports(ledger: &Ledger, issuer: &Address, manage_app: AppId) -> Vec<ContentId> {
    ledger
        .log()
        .iter()
        .filter(|c| c.txn.sender == *issuer && matches!(c.txn.kind, TxnKind::Payment { .. }))
        .filter_map(|c| ReportNote::parse(&c.txn.note).ok())
        .filter(|n| n.manage_app == manage_app)
        .map(|n| n.cid)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_ids_are_stable_hex() {
        let cid = ContentId::of(b"");
        assert_eq!(cid.as_str(), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        assert_eq!(ContentId::of(b"a"), ContentId::of(b"a"));
        assert_ne!(ContentId::of(b"a"), ContentId::of(b"b"));
        assert!("E3B0".parse::<ContentId>().is_err());
    }

    #[test]
    fn note_wire_format() {
        let note = ReportNote { manage_app: AppId(42), cid: ContentId::of(b"report") };
        let text = note.render();
        assert_eq!(text, format!("42+{}", ContentId::of(b"report")));
        assert_eq!(ReportNote::parse(text.as_bytes()).unwrap(), note);
        for bad in ["42", "+abc", "4x+abc", &format!("042+{}", note.cid), &format!("42+{}+1", note.cid)] {
            assert!(ReportNote::parse(bad.as_bytes()).is_err(), "{bad}");
        }
    }

    #[test]
    fn store_round_trip() {
        let mut s = ReportStore::new();
        let a = s.store(b"alpha");
        let again = s.store(b"alpha");
        let b = s.store(b"beta");
        assert_eq!(a, again);
        assert_eq!(s.fetch(&a).unwrap(), b"alpha");
        assert_eq!(s.fetch(&b).unwrap(), b"beta");
        assert_eq!(s.len(), 2);
        assert!(matches!(s.fetch(&ContentId::of(b"gamma")), Err(ReportError::Unknown(_))));
    }
}
