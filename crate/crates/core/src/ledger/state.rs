use std::collections::{BTreeMap, BTreeSet};

use crate::programs::{KeyValueState, StateSchema};

use super::{Address, AppId, AssetId, ConfigValue, MicroAlgos, Timestamp};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Asset {
    pub id: AssetId,
    pub creator: Address,
    pub total: u64,
    pub decimals: u32,
    pub default_frozen: bool,
    pub manager: Option<Address>,
    pub freeze: Option<Address>,
    pub clawback: Option<Address>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AssetHolding {
    pub balance: u64,
    pub frozen: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Account {
    pub balance: MicroAlgos,
    pub holdings: BTreeMap<AssetId, AssetHolding>,
    /// Local state per opted-in application.
    pub local: BTreeMap<AppId, KeyValueState>,
    pub created_apps: BTreeSet<AppId>,
}

impl Account {
    /// An account with nothing in it is exempt from the minimum balance.
    pub fn is_empty(&self) -> bool {
        self.balance == MicroAlgos::ZERO
            && self.holdings.is_empty()
            && self.local.is_empty()
            && self.created_apps.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AppRecord {
    pub id: AppId,
    pub name: String,
    pub creator: Address,
    pub schema: StateSchema,
    pub global: KeyValueState,
    pub config: BTreeMap<String, ConfigValue>,
    /// Once set, update and delete calls are refused.
    pub finalized: bool,
}

/// The mutable part of a ledger. Group evaluation works on a clone and
/// swaps it in only when every transaction is approved.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LedgerState {
    pub now: Timestamp,
    pub accounts: BTreeMap<Address, Account>,
    pub assets: BTreeMap<AssetId, Asset>,
    pub apps: BTreeMap<AppId, AppRecord>,
    pub next_index: u64,
    pub accounts_created: u64,
    /// Accounts created with a secret key. Contract accounts are absent and
    /// can only be authorized by their program.
    pub keyed: BTreeSet<Address>,
}
