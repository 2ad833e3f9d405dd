//! Approval programs.
//!
//! Stateless programs are pure predicates over a transaction group. They back
//! contract accounts (the program's address is the account) and delegated
//! signatures (an account signs the program and anyone holding it may spend
//! from that account while the predicate holds).
//!
//! Stateful programs are handlers invoked by application calls. They see a
//! [`CallContext`] with the group, the call's arguments and referenced state,
//! and buffer writes to their own global state and to opted-in local state.
//! The ledger commits those writes only if the whole group is approved.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::ledger::state::LedgerState;
use crate::ledger::{
    Address, AppId, AssetId, ConfigValue, OnComplete, Timestamp, Transaction, TxnKind,
};

/// Maximum number of global key-value pairs an application may declare.
pub const MAX_GLOBAL_PAIRS: u64 = 64;
/// Maximum number of local key-value pairs per opted-in account.
pub const MAX_LOCAL_PAIRS: u64 = 16;

#[derive(Clone, PartialEq, Eq)]
pub enum TealValue {
    Uint(u64),
    Bytes(Vec<u8>),
}

impl TealValue {
    pub fn as_uint(&self) -> Option<u64> {
        match self {
            TealValue::Uint(v) => Some(*v),
            TealValue::Bytes(_) => None,
        }
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            TealValue::Uint(_) => None,
            TealValue::Bytes(b) => Some(b),
        }
    }
}

impl fmt::Debug for TealValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TealValue::Uint(v) => write!(f, "{v}"),
            TealValue::Bytes(b) => write!(f, "0x{}", hex::encode(b)),
        }
    }
}

impl fmt::Display for TealValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Global or local key-value store of an application.
pub type KeyValueState = BTreeMap<Vec<u8>, TealValue>;

/// Storage declared by an application at creation. Immutable afterwards.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StateSchema {
    pub global_uints: u64,
    pub global_bytes: u64,
    pub local_uints: u64,
    pub local_bytes: u64,
}

impl StateSchema {
    pub fn validate(&self) -> Result<(), Deny> {
        if self.global_uints + self.global_bytes > MAX_GLOBAL_PAIRS {
            return Err(Deny::new("global schema exceeds 64 pairs"));
        }
        if self.local_uints + self.local_bytes > MAX_LOCAL_PAIRS {
            return Err(Deny::new("local schema exceeds 16 pairs"));
        }
        Ok(())
    }

    /// Checks a store against the (uint, bytes) limits of one side of the schema.
    pub(crate) fn admits(store: &KeyValueState, uints: u64, bytes: u64) -> Result<(), Deny> {
        let (mut u, mut b) = (0u64, 0u64);
        for v in store.values() {
            match v {
                TealValue::Uint(_) => u += 1,
                TealValue::Bytes(_) => b += 1,
            }
        }
        if u > uints || b > bytes {
            return Err(Deny::new(format!(
                "state holds {u} uints / {b} byte slices, schema allows {uints} / {bytes}"
            )));
        }
        Ok(())
    }
}

/// Reason an approval program refused a transaction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Deny(pub String);

impl Deny {
    pub fn new(reason: impl Into<String>) -> Self {
        Self(reason.into())
    }
}

impl fmt::Display for Deny {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Fails with `reason` unless `cond` holds.
pub fn ensure(cond: bool, reason: impl FnOnce() -> String) -> Result<(), Deny> {
    if cond {
        Ok(())
    } else {
        Err(Deny(reason()))
    }
}

/// Logic of a stateless program.
///
/// Implementations only see the group, the position being authorized and the
/// logic-signature arguments; there is no access to ledger state.
pub trait LogicProgram: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Canonical bytes identifying the program. Two programs with equal
    /// identity bytes are the same program and share an address.
    fn identity(&self) -> Vec<u8>;

    fn approve(&self, group: &[Transaction], index: usize, args: &[Vec<u8>]) -> Result<(), Deny>;
}

/// A shareable stateless program.
#[derive(Clone)]
pub struct StatelessProgram(Arc<dyn LogicProgram>);

impl StatelessProgram {
    pub fn new(program: impl LogicProgram + 'static) -> Self {
        Self(Arc::new(program))
    }

    pub fn name(&self) -> &str {
        self.0.name()
    }

    pub fn identity(&self) -> Vec<u8> {
        self.0.identity()
    }

    pub fn approve(&self, group: &[Transaction], index: usize, args: &[Vec<u8>]) -> Result<(), Deny> {
        self.0.approve(group, index, args)
    }
}

impl PartialEq for StatelessProgram {
    fn eq(&self, other: &Self) -> bool {
        self.identity() == other.identity()
    }
}

impl Eq for StatelessProgram {}

impl fmt::Debug for StatelessProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StatelessProgram({})", self.name())
    }
}

/// Address of the contract account controlled by `program`.
pub fn contract_account_address(program: &StatelessProgram) -> Address {
    Address::derive(b"Program", &program.identity())
}

/// A logic signature attached to a transaction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogicSig {
    pub program: StatelessProgram,
    pub args: Vec<Vec<u8>>,
    /// Account that signed the program for delegated use. `None` means the
    /// program authorizes its own contract account.
    pub delegator: Option<Address>,
}

impl LogicSig {
    pub fn contract(program: StatelessProgram) -> Self {
        Self { program, args: Vec::new(), delegator: None }
    }

    pub fn delegated(program: StatelessProgram, delegator: Address) -> Self {
        Self { program, args: Vec::new(), delegator: Some(delegator) }
    }

    /// The only sender this signature can authorize.
    pub fn authorizer(&self) -> Address {
        self.delegator.unwrap_or_else(|| contract_account_address(&self.program))
    }
}

/// Evaluates `sig` for the transaction at `index`.
pub fn eval_logic_signature(sig: &LogicSig, group: &[Transaction], index: usize) -> Result<(), Deny> {
    let txn = group
        .get(index)
        .ok_or_else(|| Deny::new(format!("no transaction at index {index}")))?;
    ensure(txn.sender == sig.authorizer(), || {
        format!("{} does not authorize sender {}", sig.program.name(), txn.sender.short())
    })?;
    sig.program.approve(group, index, &sig.args)
}

/// Handler of a stateful application.
pub trait StatefulProgram: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn schema(&self) -> StateSchema;

    /// Approval program: runs for every call except `ClearState`.
    fn approve(&self, ctx: &mut CallContext<'_>) -> Result<(), Deny>;

    /// Clear-state program. Local state is removed whatever it returns.
    fn clear_state(&self, _ctx: &mut CallContext<'_>) -> Result<(), Deny> {
        Ok(())
    }
}

/// Writes buffered by a single application call.
#[derive(Debug, Default)]
pub(crate) struct StateWrites {
    pub global: BTreeMap<Vec<u8>, Option<TealValue>>,
    pub local: BTreeMap<Address, BTreeMap<Vec<u8>, Option<TealValue>>>,
}

/// Everything an application call may observe, plus its write buffer.
pub struct CallContext<'a> {
    state: &'a LedgerState,
    group: &'a [Transaction],
    index: usize,
    app_id: AppId,
    writes: StateWrites,
}

impl<'a> CallContext<'a> {
    pub(crate) fn new(state: &'a LedgerState, group: &'a [Transaction], index: usize, app_id: AppId) -> Self {
        Self { state, group, index, app_id, writes: StateWrites::default() }
    }

    pub(crate) fn into_writes(self) -> StateWrites {
        self.writes
    }

    pub fn group(&self) -> &'a [Transaction] {
        self.group
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn txn(&self) -> &'a Transaction {
        &self.group[self.index]
    }

    pub fn sender(&self) -> Address {
        self.txn().sender
    }

    pub fn app_id(&self) -> AppId {
        self.app_id
    }

    pub fn now(&self) -> Timestamp {
        self.state.now
    }

    pub fn on_complete(&self) -> OnComplete {
        match &self.txn().kind {
            TxnKind::AppCall { on_complete, .. } => *on_complete,
            _ => unreachable!("call context built for a non-call transaction"),
        }
    }

    pub fn args(&self) -> &'a [Vec<u8>] {
        match &self.txn().kind {
            TxnKind::AppCall { args, .. } => args,
            _ => &[],
        }
    }

    pub fn arg(&self, i: usize) -> Option<&'a [u8]> {
        self.args().get(i).map(Vec::as_slice)
    }

    /// Accounts passed with the call (not including the sender).
    pub fn accounts(&self) -> &'a [Address] {
        match &self.txn().kind {
            TxnKind::AppCall { accounts, .. } => accounts,
            _ => &[],
        }
    }

    fn apps(&self) -> &'a [AppId] {
        match &self.txn().kind {
            TxnKind::AppCall { apps, .. } => apps,
            _ => &[],
        }
    }

    fn account_referenced(&self, addr: &Address) -> Result<(), Deny> {
        ensure(*addr == self.sender() || self.accounts().contains(addr), || {
            format!("account {} not referenced by the call", addr.short())
        })
    }

    fn app_referenced(&self, app: AppId) -> Result<(), Deny> {
        ensure(app == self.app_id || self.apps().contains(&app), || {
            format!("application {app} not referenced by the call")
        })
    }

    pub fn creator(&self) -> Address {
        self.state.apps[&self.app_id].creator
    }

    pub fn config(&self, key: &str) -> Option<ConfigValue> {
        self.state.apps[&self.app_id].config.get(key).copied()
    }

    pub fn config_address(&self, key: &str) -> Result<Address, Deny> {
        match self.config(key) {
            Some(ConfigValue::Address(a)) => Ok(a),
            _ => Err(Deny::new(format!("application not linked: {key}"))),
        }
    }

    pub fn config_app(&self, key: &str) -> Result<AppId, Deny> {
        match self.config(key) {
            Some(ConfigValue::App(a)) => Ok(a),
            _ => Err(Deny::new(format!("application not linked: {key}"))),
        }
    }

    pub fn config_asset(&self, key: &str) -> Result<AssetId, Deny> {
        match self.config(key) {
            Some(ConfigValue::Asset(a)) => Ok(a),
            _ => Err(Deny::new(format!("application not linked: {key}"))),
        }
    }

    /// Reads this application's global state, including pending writes.
    pub fn global_get(&self, key: &[u8]) -> Option<TealValue> {
        if let Some(pending) = self.writes.global.get(key) {
            return pending.clone();
        }
        self.state.apps[&self.app_id].global.get(key).cloned()
    }

    /// Integer global value; absent keys read as zero.
    pub fn global_uint(&self, key: &[u8]) -> u64 {
        self.global_get(key).and_then(|v| v.as_uint()).unwrap_or(0)
    }

    pub fn global_put(&mut self, key: &[u8], value: impl Into<TealValue>) {
        self.writes.global.insert(key.to_vec(), Some(value.into()));
    }

    /// Reads the global state of a referenced application.
    pub fn foreign_global(&self, app: AppId, key: &[u8]) -> Result<Option<TealValue>, Deny> {
        if app == self.app_id {
            return Ok(self.global_get(key));
        }
        self.app_referenced(app)?;
        let record = self
            .state
            .apps
            .get(&app)
            .ok_or_else(|| Deny::new(format!("unknown application {app}")))?;
        Ok(record.global.get(key).cloned())
    }

    pub fn foreign_global_uint(&self, app: AppId, key: &[u8]) -> Result<u64, Deny> {
        Ok(self.foreign_global(app, key)?.and_then(|v| v.as_uint()).unwrap_or(0))
    }

    pub fn is_opted_in(&self, account: &Address) -> Result<bool, Deny> {
        self.account_referenced(account)?;
        Ok(self
            .state
            .accounts
            .get(account)
            .is_some_and(|a| a.local.contains_key(&self.app_id)))
    }

    /// Reads this application's local state for a referenced, opted-in account.
    pub fn local_get(&self, account: &Address, key: &[u8]) -> Result<Option<TealValue>, Deny> {
        ensure(self.is_opted_in(account)?, || {
            format!("account {} not opted in", account.short())
        })?;
        if let Some(pending) = self.writes.local.get(account).and_then(|m| m.get(key)) {
            return Ok(pending.clone());
        }
        Ok(self.state.accounts[account].local[&self.app_id].get(key).cloned())
    }

    /// Integer local value; absent keys read as zero.
    pub fn local_uint(&self, account: &Address, key: &[u8]) -> Result<u64, Deny> {
        Ok(self.local_get(account, key)?.and_then(|v| v.as_uint()).unwrap_or(0))
    }

    pub fn local_put(&mut self, account: &Address, key: &[u8], value: impl Into<TealValue>) -> Result<(), Deny> {
        ensure(self.is_opted_in(account)?, || {
            format!("account {} not opted in", account.short())
        })?;
        self.writes
            .local
            .entry(*account)
            .or_default()
            .insert(key.to_vec(), Some(value.into()));
        Ok(())
    }

    /// Asset balance of a referenced account; `None` when not opted in.
    pub fn asset_balance(&self, account: &Address, asset: AssetId) -> Result<Option<u64>, Deny> {
        self.account_referenced(account)?;
        Ok(self
            .state
            .accounts
            .get(account)
            .and_then(|a| a.holdings.get(&asset))
            .map(|h| h.balance))
    }

    pub fn asset_total(&self, asset: AssetId) -> Option<u64> {
        self.state.assets.get(&asset).map(|a| a.total)
    }
}
