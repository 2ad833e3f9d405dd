use std::fmt;

use sha2::{Digest, Sha256};

use crate::programs::{LogicSig, TealValue};

/// Flat per-transaction fee.
pub const MIN_FEE: MicroAlgos = MicroAlgos(1_000);

/// Largest number of transactions allowed in one atomic group.
pub const MAX_GROUP_SIZE: usize = 16;

/// Largest note a transaction may carry, in bytes.
pub const MAX_NOTE_BYTES: usize = 1_024;

/// Seconds since an arbitrary epoch. The ledger never reads a wall clock.
pub type Timestamp = u64;

/// An account address.
///
/// User accounts receive addresses derived from a per-ledger counter; contract
/// accounts derive theirs from the identity bytes of their program.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address([u8; 32]);

impl Address {
    pub const fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub(crate) fn derive(domain: &[u8], data: &[u8]) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(domain);
        hasher.update(data);
        Self(hasher.finalize().into())
    }

    /// Short human form used in transcripts and debug output.
    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({})", self.short())
    }
}

/// An amount of the native currency, in microAlgos.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MicroAlgos(pub u64);

impl MicroAlgos {
    pub const ZERO: Self = Self(0);

    pub fn checked_add(self, other: Self) -> Option<Self> {
        self.0.checked_add(other.0).map(Self)
    }

    pub fn checked_sub(self, other: Self) -> Option<Self> {
        self.0.checked_sub(other.0).map(Self)
    }
}

impl fmt::Display for MicroAlgos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} microAlgos", self.0)
    }
}

impl fmt::Debug for MicroAlgos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}µA", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct AssetId(pub u64);

impl fmt::Display for AssetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct AppId(pub u64);

impl fmt::Display for AppId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// How a transaction is authorized.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SignatureKind {
    /// Signed with the secret key of the named account.
    SecretKey(Address),
    /// Authorized by a stateless program, either as a contract account or as
    /// a delegated signature.
    LogicSig(LogicSig),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OnComplete {
    NoOp,
    OptIn,
    CloseOut,
    ClearState,
    UpdateApplication,
    DeleteApplication,
}

impl OnComplete {
    pub fn as_str(&self) -> &'static str {
        match self {
            OnComplete::NoOp => "NoOp",
            OnComplete::OptIn => "OptIn",
            OnComplete::CloseOut => "CloseOut",
            OnComplete::ClearState => "ClearState",
            OnComplete::UpdateApplication => "UpdateApplication",
            OnComplete::DeleteApplication => "DeleteApplication",
        }
    }
}

/// Value stored in an application's configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConfigValue {
    Address(Address),
    App(AppId),
    Asset(AssetId),
    Uint(u64),
}

/// Payload of an `UpdateApplication` call: configuration entries to link into
/// the application and whether to make it immutable afterwards.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AppUpdate {
    pub links: Vec<(String, ConfigValue)>,
    pub finalize: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TxnKind {
    Payment {
        receiver: Address,
        amount: MicroAlgos,
    },
    AssetTransfer {
        asset_id: AssetId,
        receiver: Address,
        amount: u64,
        /// Source account for a clawback transfer.
        revoke_target: Option<Address>,
    },
    /// Reassigns the clawback and freeze authorities of an asset; only the
    /// asset manager may send it.
    AssetConfig {
        asset_id: AssetId,
        clawback: Option<Address>,
        freeze: Option<Address>,
    },
    AppCall {
        app_id: AppId,
        on_complete: OnComplete,
        args: Vec<Vec<u8>>,
        accounts: Vec<Address>,
        apps: Vec<AppId>,
        update: Option<AppUpdate>,
    },
}

impl TxnKind {
    pub fn name(&self) -> &'static str {
        match self {
            TxnKind::Payment { .. } => "pay",
            TxnKind::AssetTransfer { .. } => "axfer",
            TxnKind::AssetConfig { .. } => "acfg",
            TxnKind::AppCall { .. } => "appl",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transaction {
    pub sender: Address,
    pub fee: MicroAlgos,
    pub first_valid: Timestamp,
    pub last_valid: Timestamp,
    pub note: Vec<u8>,
    pub signature: SignatureKind,
    pub kind: TxnKind,
}

/// Number of seconds a freshly built transaction stays valid.
pub const DEFAULT_VALIDITY: Timestamp = 1_000;

impl Transaction {
    /// A transaction signed by the sender's own key, valid from `now` for
    /// [`DEFAULT_VALIDITY`] seconds.
    pub fn new(sender: Address, kind: TxnKind, now: Timestamp) -> Self {
        Self {
            sender,
            fee: MIN_FEE,
            first_valid: now,
            last_valid: now.saturating_add(DEFAULT_VALIDITY),
            note: Vec::new(),
            signature: SignatureKind::SecretKey(sender),
            kind,
        }
    }

    pub fn payment(sender: Address, receiver: Address, amount: MicroAlgos, now: Timestamp) -> Self {
        Self::new(sender, TxnKind::Payment { receiver, amount }, now)
    }

    pub fn asset_transfer(
        sender: Address,
        asset_id: AssetId,
        receiver: Address,
        amount: u64,
        now: Timestamp,
    ) -> Self {
        Self::new(
            sender,
            TxnKind::AssetTransfer { asset_id, receiver, amount, revoke_target: None },
            now,
        )
    }

    /// Clawback transfer moving `amount` from `target` to `receiver`.
    pub fn clawback(
        sender: Address,
        asset_id: AssetId,
        target: Address,
        receiver: Address,
        amount: u64,
        now: Timestamp,
    ) -> Self {
        Self::new(
            sender,
            TxnKind::AssetTransfer { asset_id, receiver, amount, revoke_target: Some(target) },
            now,
        )
    }

    /// Zero-amount transfer to self, which opts the sender into the asset.
    pub fn asset_opt_in(sender: Address, asset_id: AssetId, now: Timestamp) -> Self {
        Self::asset_transfer(sender, asset_id, sender, 0, now)
    }

    pub fn app_call(
        sender: Address,
        app_id: AppId,
        on_complete: OnComplete,
        args: Vec<Vec<u8>>,
        now: Timestamp,
    ) -> Self {
        Self::new(
            sender,
            TxnKind::AppCall {
                app_id,
                on_complete,
                args,
                accounts: Vec::new(),
                apps: Vec::new(),
                update: None,
            },
            now,
        )
    }

    pub fn with_signature(mut self, signature: SignatureKind) -> Self {
        self.signature = signature;
        self
    }

    pub fn with_note(mut self, note: impl Into<Vec<u8>>) -> Self {
        self.note = note.into();
        self
    }

    pub fn with_last_valid(mut self, last_valid: Timestamp) -> Self {
        self.last_valid = last_valid;
        self
    }

    /// Adds foreign accounts to an application call. No-op for other kinds.
    pub fn with_accounts(mut self, extra: impl IntoIterator<Item = Address>) -> Self {
        if let TxnKind::AppCall { accounts, .. } = &mut self.kind {
            accounts.extend(extra);
        }
        self
    }

    /// Adds foreign applications to an application call. No-op for other kinds.
    pub fn with_apps(mut self, extra: impl IntoIterator<Item = AppId>) -> Self {
        if let TxnKind::AppCall { apps, .. } = &mut self.kind {
            apps.extend(extra);
        }
        self
    }

    /// First application argument, if this is an application call.
    pub fn app_action(&self) -> Option<&[u8]> {
        match &self.kind {
            TxnKind::AppCall { args, .. } => args.first().map(Vec::as_slice),
            _ => None,
        }
    }
}

/// An ordered list of 1 to 16 transactions evaluated all-or-nothing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransactionGroup {
    txns: Vec<Transaction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum GroupSizeError {
    #[error("group is empty")]
    Empty,
    #[error("group has {0} transactions, maximum is 16")]
    TooLarge(usize),
}

impl TransactionGroup {
    pub fn new(txns: Vec<Transaction>) -> Result<Self, GroupSizeError> {
        match txns.len() {
            0 => Err(GroupSizeError::Empty),
            n if n > MAX_GROUP_SIZE => Err(GroupSizeError::TooLarge(n)),
            _ => Ok(Self { txns }),
        }
    }

    pub fn single(txn: Transaction) -> Self {
        Self { txns: vec![txn] }
    }

    pub fn txns(&self) -> &[Transaction] {
        &self.txns
    }

    pub fn len(&self) -> usize {
        self.txns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txns.is_empty()
    }

    pub fn into_txns(self) -> Vec<Transaction> {
        self.txns
    }
}

/// Encodes an integer application argument the way `btoi` expects it.
pub fn itob(value: u64) -> Vec<u8> {
    value.to_be_bytes().to_vec()
}

/// Decodes a big-endian integer argument of at most 8 bytes.
pub fn btoi(bytes: &[u8]) -> Option<u64> {
    if bytes.len() > 8 {
        return None;
    }
    Some(bytes.iter().fold(0u64, |acc, b| (acc << 8) | u64::from(*b)))
}

impl From<u64> for TealValue {
    fn from(v: u64) -> Self {
        TealValue::Uint(v)
    }
}
