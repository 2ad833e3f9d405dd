//! Deterministic in-memory ledger.
//!
//! All mutation goes through [`Ledger::submit_group`] (plus a handful of
//! direct operations for account setup, asset and application creation and
//! the clock). A group is evaluated in order against a working copy of the
//! state; the copy replaces the live state only when every transaction is
//! approved, so a rejected group leaves no trace, fees included.

mod cost;
pub(crate) mod state;
mod types;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

pub use cost::{CostLabels, CostLedger, CostRow, MinBalanceSchedule};
pub use state::{Account, AppRecord, Asset, AssetHolding};
pub use types::*;

use crate::programs::{
    eval_logic_signature, CallContext, Deny, KeyValueState, StateSchema, StateWrites,
    StatefulProgram, TealValue,
};
use state::LedgerState;

/// Why a group was rejected.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RejectReason {
    GroupSize(GroupSizeError),
    FeeTooLow,
    NoteTooLarge,
    ClockWindow { now: Timestamp, first_valid: Timestamp, last_valid: Timestamp },
    BadSignature,
    LogicRejected(String),
    AppRejected(String),
    UnknownAccount(Address),
    UnknownAsset(AssetId),
    UnknownApp(AppId),
    InsufficientBalance { account: Address },
    InsufficientAssetBalance { account: Address, asset: AssetId },
    MinBalance { account: Address, required: MicroAlgos, balance: MicroAlgos },
    NotOptedIn { account: Address, asset: AssetId },
    AlreadyOptedIn { account: Address },
    NotOptedInApp { account: Address, app: AppId },
    FrozenHolding { account: Address, asset: AssetId },
    NotClawback,
    NotManager,
    NotCreator,
    Finalized(AppId),
}

impl RejectReason {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::GroupSize(_) => "group-size",
            RejectReason::FeeTooLow => "fee-too-low",
            RejectReason::NoteTooLarge => "note-too-large",
            RejectReason::ClockWindow { .. } => "clock-window",
            RejectReason::BadSignature => "bad-signature",
            RejectReason::LogicRejected(_) => "logic-rejected",
            RejectReason::AppRejected(_) => "app-rejected",
            RejectReason::UnknownAccount(_) => "unknown-account",
            RejectReason::UnknownAsset(_) => "unknown-asset",
            RejectReason::UnknownApp(_) => "unknown-app",
            RejectReason::InsufficientBalance { .. } => "insufficient-balance",
            RejectReason::InsufficientAssetBalance { .. } => "insufficient-asset-balance",
            RejectReason::MinBalance { .. } => "min-balance",
            RejectReason::NotOptedIn { .. } => "not-opted-in",
            RejectReason::AlreadyOptedIn { .. } => "already-opted-in",
            RejectReason::NotOptedInApp { .. } => "not-opted-in-app",
            RejectReason::FrozenHolding { .. } => "frozen-holding",
            RejectReason::NotClawback => "not-clawback",
            RejectReason::NotManager => "not-manager",
            RejectReason::NotCreator => "not-creator",
            RejectReason::Finalized(_) => "finalized",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::GroupSize(e) => write!(f, "{e}"),
            RejectReason::ClockWindow { now, first_valid, last_valid } => {
                write!(f, "now {now} outside validity window [{first_valid}, {last_valid}]")
            }
            RejectReason::LogicRejected(r) | RejectReason::AppRejected(r) => f.write_str(r),
            RejectReason::UnknownAccount(a) => write!(f, "unknown account {}", a.short()),
            RejectReason::UnknownAsset(a) => write!(f, "unknown asset {a}"),
            RejectReason::UnknownApp(a) => write!(f, "unknown application {a}"),
            RejectReason::InsufficientBalance { account } => {
                write!(f, "{} cannot cover amount and fee", account.short())
            }
            RejectReason::InsufficientAssetBalance { account, asset } => {
                write!(f, "{} holds too little of asset {asset}", account.short())
            }
            RejectReason::MinBalance { account, required, balance } => write!(
                f,
                "{} balance {} below minimum {}",
                account.short(),
                balance.0,
                required.0
            ),
            RejectReason::NotOptedIn { account, asset } => {
                write!(f, "{} not opted into asset {asset}", account.short())
            }
            RejectReason::AlreadyOptedIn { account } => write!(f, "{} already opted in", account.short()),
            RejectReason::NotOptedInApp { account, app } => {
                write!(f, "{} not opted into application {app}", account.short())
            }
            RejectReason::FrozenHolding { account, asset } => {
                write!(f, "holding of asset {asset} by {} is frozen", account.short())
            }
            RejectReason::Finalized(app) => write!(f, "application {app} is immutable"),
            other => f.write_str(other.code()),
        }
    }
}

/// A rejected group: the reason and the position of the failing transaction.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{}: {reason}{}", reason.code(), index.map(|i| format!(" (txn {i})")).unwrap_or_default())]
pub struct Rejection {
    pub index: Option<usize>,
    pub reason: RejectReason,
}

impl Rejection {
    fn at(index: usize, reason: RejectReason) -> Self {
        Self { index: Some(index), reason }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("unknown account {}", .0.short())]
    UnknownAccount(Address),
    #[error("unknown asset {0}")]
    UnknownAsset(AssetId),
    #[error("unknown application {0}")]
    UnknownApp(AppId),
    #[error("{account} needs {needed} microAlgos, has {available}")]
    InsufficientBalance { account: String, needed: u64, available: u64 },
    #[error("cannot move time backwards from {now} to {to}")]
    TimeReversal { now: Timestamp, to: Timestamp },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid asset: {0}")]
    InvalidAsset(String),
    #[error("group rejected: {0}")]
    Rejected(#[from] Rejection),
}

/// Parameters of a new asset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssetParams {
    pub total: u64,
    pub decimals: u32,
    pub default_frozen: bool,
    pub manager: Option<Address>,
    pub freeze: Option<Address>,
    pub clawback: Option<Address>,
}

/// A transaction as recorded after its group was committed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommittedTxn {
    pub group: u64,
    pub time: Timestamp,
    pub txn: Transaction,
}

#[derive(Clone)]
pub struct Ledger {
    state: LedgerState,
    programs: BTreeMap<AppId, Arc<dyn StatefulProgram>>,
    log: Vec<CommittedTxn>,
    groups_committed: u64,
    costs: CostLedger,
    schedule: MinBalanceSchedule,
}

impl Default for Ledger {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Ledger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ledger")
            .field("now", &self.state.now)
            .field("accounts", &self.state.accounts.len())
            .field("assets", &self.state.assets.len())
            .field("apps", &self.state.apps.len())
            .field("groups_committed", &self.groups_committed)
            .finish()
    }
}

/// Ledgers compare equal when every observable piece of state matches:
/// accounts, assets, applications, clock, transaction log and costs.
impl PartialEq for Ledger {
    fn eq(&self, other: &Self) -> bool {
        self.state == other.state
            && self.log == other.log
            && self.groups_committed == other.groups_committed
            && self.costs == other.costs
            && self.schedule == other.schedule
            && self.programs.keys().eq(other.programs.keys())
    }
}

impl Ledger {
    pub fn new() -> Self {
        Self::with_schedule(MinBalanceSchedule::default())
    }

    pub fn with_schedule(schedule: MinBalanceSchedule) -> Self {
        Self {
            state: LedgerState { next_index: 1, ..Default::default() },
            programs: BTreeMap::new(),
            log: Vec::new(),
            groups_committed: 0,
            costs: CostLedger::default(),
            schedule,
        }
    }

    pub fn schedule(&self) -> &MinBalanceSchedule {
        &self.schedule
    }

    pub fn now(&self) -> Timestamp {
        self.state.now
    }

    pub fn costs(&self) -> &CostLedger {
        &self.costs
    }

    pub fn log(&self) -> &[CommittedTxn] {
        &self.log
    }

    pub fn create_account(&mut self) -> Address {
        self.state.accounts_created += 1;
        let addr = Address::derive(b"account", &self.state.accounts_created.to_be_bytes());
        self.state.accounts.entry(addr).or_default();
        self.state.keyed.insert(addr);
        addr
    }

    pub fn account(&self, addr: &Address) -> Option<&Account> {
        self.state.accounts.get(addr)
    }

    fn account_or_err(&self, addr: &Address) -> Result<&Account, LedgerError> {
        self.state.accounts.get(addr).ok_or(LedgerError::UnknownAccount(*addr))
    }

    /// Credits `amount` without a transaction (faucet).
    pub fn fund_algos(&mut self, addr: &Address, amount: MicroAlgos) -> Result<(), LedgerError> {
        let acct = self
            .state
            .accounts
            .get_mut(addr)
            .ok_or(LedgerError::UnknownAccount(*addr))?;
        acct.balance = acct.balance.checked_add(amount).expect("microAlgo supply overflow");
        Ok(())
    }

    pub fn balance(&self, addr: &Address) -> MicroAlgos {
        self.state.accounts.get(addr).map(|a| a.balance).unwrap_or_default()
    }

    pub fn asset(&self, id: AssetId) -> Option<&Asset> {
        self.state.assets.get(&id)
    }

    pub fn holding(&self, addr: &Address, asset: AssetId) -> Option<AssetHolding> {
        self.state.accounts.get(addr)?.holdings.get(&asset).copied()
    }

    /// Asset balance; zero when the account is not opted in.
    pub fn asset_balance(&self, addr: &Address, asset: AssetId) -> u64 {
        self.holding(addr, asset).map(|h| h.balance).unwrap_or(0)
    }

    pub fn app(&self, id: AppId) -> Option<&AppRecord> {
        self.state.apps.get(&id)
    }

    pub fn global_state(&self, app: AppId) -> Option<&KeyValueState> {
        self.state.apps.get(&app).map(|a| &a.global)
    }

    pub fn global_value(&self, app: AppId, key: &[u8]) -> Option<&TealValue> {
        self.global_state(app)?.get(key)
    }

    pub fn local_state(&self, addr: &Address, app: AppId) -> Option<&KeyValueState> {
        self.state.accounts.get(addr)?.local.get(&app)
    }

    pub fn local_value(&self, addr: &Address, app: AppId, key: &[u8]) -> Option<&TealValue> {
        self.local_state(addr, app)?.get(key)
    }

    pub fn app_config(&self, app: AppId, key: &str) -> Option<ConfigValue> {
        self.state.apps.get(&app)?.config.get(key).copied()
    }

    /// Sum of all microAlgo balances.
    pub fn total_algos(&self) -> u128 {
        self.state.accounts.values().map(|a| u128::from(a.balance.0)).sum()
    }

    /// Sum of all holdings of an asset.
    pub fn asset_circulating_total(&self, asset: AssetId) -> u128 {
        self.state
            .accounts
            .values()
            .filter_map(|a| a.holdings.get(&asset))
            .map(|h| u128::from(h.balance))
            .sum()
    }

    /// Current minimum balance of an account.
    pub fn min_balance(&self, addr: &Address) -> Result<MicroAlgos, LedgerError> {
        let acct = self.account_or_err(addr)?;
        Ok(MicroAlgos(min_balance_of(&self.state, &self.schedule, acct)))
    }

    pub fn advance_time(&mut self, to: Timestamp) -> Result<(), LedgerError> {
        if to < self.state.now {
            return Err(LedgerError::TimeReversal { now: self.state.now, to });
        }
        self.state.now = to;
        Ok(())
    }

    fn next_index(&mut self) -> u64 {
        let id = self.state.next_index;
        self.state.next_index += 1;
        id
    }

    /// Charges a creation fee and checks the creator can carry the new
    /// minimum balance; applies `create` only when both hold.
    fn charge_creation(
        &mut self,
        creator: &Address,
        label: &str,
        increment: u64,
        create: impl FnOnce(&mut Self),
    ) -> Result<(), LedgerError> {
        let acct = self.account_or_err(creator)?;
        let required = min_balance_of(&self.state, &self.schedule, acct) + increment + MIN_FEE.0;
        if acct.balance.0 < required {
            return Err(LedgerError::InsufficientBalance {
                account: creator.short(),
                needed: required,
                available: acct.balance.0,
            });
        }
        create(self);
        let acct = self.state.accounts.get_mut(creator).expect("checked above");
        acct.balance.0 -= MIN_FEE.0;
        self.costs.add_fee(*creator, label, MIN_FEE);
        self.costs.add_min_balance(*creator, label, increment as i64);
        Ok(())
    }

    pub fn create_asset(&mut self, creator: &Address, params: AssetParams) -> Result<AssetId, LedgerError> {
        if params.decimals > 19 {
            return Err(LedgerError::InvalidAsset("decimals must be at most 19".into()));
        }
        let increment = self.schedule.asset_opt_in;
        let mut created = None;
        self.charge_creation(creator, "Create new ASA", increment, |ledger| {
            let id = AssetId(ledger.next_index());
            ledger.state.assets.insert(
                id,
                Asset {
                    id,
                    creator: *creator,
                    total: params.total,
                    decimals: params.decimals,
                    default_frozen: params.default_frozen,
                    manager: params.manager,
                    freeze: params.freeze,
                    clawback: params.clawback,
                },
            );
            let acct = ledger.state.accounts.get_mut(creator).expect("creator exists");
            acct.holdings.insert(id, AssetHolding { balance: params.total, frozen: false });
            created = Some(id);
        })?;
        Ok(created.expect("created on success"))
    }

    /// Registers a stateful application created by `creator`. Costs are
    /// recorded under the label `Deploy <program name>`.
    pub fn register_stateful(
        &mut self,
        program: Arc<dyn StatefulProgram>,
        creator: &Address,
    ) -> Result<AppId, LedgerError> {
        let schema = program.schema();
        schema.validate().map_err(|d| LedgerError::InvalidSchema(d.0))?;
        let increment = self.schedule.app_creation(&schema);
        let label = format!("Deploy {}", program.name());
        let mut created = None;
        self.charge_creation(creator, &label, increment, |ledger| {
            let id = AppId(ledger.next_index());
            ledger.state.apps.insert(
                id,
                AppRecord {
                    id,
                    name: program.name().to_owned(),
                    creator: *creator,
                    schema,
                    global: KeyValueState::new(),
                    config: BTreeMap::new(),
                    finalized: false,
                },
            );
            ledger
                .state
                .accounts
                .get_mut(creator)
                .expect("creator exists")
                .created_apps
                .insert(id);
            ledger.programs.insert(id, program.clone());
            created = Some(id);
        })?;
        Ok(created.expect("created on success"))
    }

    /// Opts `addr` into an asset with a single zero-amount self transfer.
    pub fn opt_in_asset(&mut self, addr: &Address, asset: AssetId) -> Result<(), LedgerError> {
        let txn = Transaction::asset_opt_in(*addr, asset, self.now());
        self.submit_group_as(&TransactionGroup::single(txn), &"Opt into ASA".into())?;
        Ok(())
    }

    /// Stores `escrow` under `name` in the application's configuration.
    pub fn link_escrow(
        &mut self,
        app: AppId,
        name: &str,
        escrow: Address,
        authority: &Address,
    ) -> Result<(), LedgerError> {
        let update = AppUpdate { links: vec![(name.to_owned(), ConfigValue::Address(escrow))], finalize: false };
        self.submit_update(app, update, authority)
    }

    /// Makes the application immutable: later update and delete calls fail.
    pub fn finalize_deployment(&mut self, app: AppId, authority: &Address) -> Result<(), LedgerError> {
        self.submit_update(app, AppUpdate { links: Vec::new(), finalize: true }, authority)
    }

    fn submit_update(&mut self, app: AppId, update: AppUpdate, authority: &Address) -> Result<(), LedgerError> {
        let txn = update_application(*authority, app, update, self.now());
        self.submit_group_as(&TransactionGroup::single(txn), &"Update Apps".into())?;
        Ok(())
    }

    pub fn submit_group(&mut self, group: &TransactionGroup) -> Result<(), Rejection> {
        self.submit_group_as(group, &CostLabels::new("Transaction"))
    }

    /// Evaluates and, if every transaction is approved, commits the group,
    /// recording its costs under `labels`.
    pub fn submit_group_as(&mut self, group: &TransactionGroup, labels: &CostLabels) -> Result<(), Rejection> {
        let (working, outcome) = self.evaluate(group);
        outcome?;
        self.commit(group, working, labels);
        Ok(())
    }

    /// Evaluates a group without committing it. The returned ledger holds the
    /// working state at the point evaluation stopped: everything applied by
    /// the transactions before a failing one, or the full result on approval.
    pub fn dry_run(&self, group: &TransactionGroup) -> (Result<(), Rejection>, Ledger) {
        let (working, outcome) = self.evaluate(group);
        let mut view = self.clone();
        view.state = working;
        (outcome, view)
    }

    fn commit(&mut self, group: &TransactionGroup, working: LedgerState, labels: &CostLabels) {
        let mut touched = BTreeSet::new();
        for txn in group.txns() {
            touched.insert(txn.sender);
            let label = labels.label_for(&txn.sender);
            self.costs.add_fee(txn.sender, label, txn.fee);
            if let TxnKind::Payment { receiver, amount } = &txn.kind {
                if *receiver != txn.sender {
                    self.costs.add_amount(txn.sender, label, *amount);
                }
            }
            touched.extend(involved_accounts(txn));
        }
        for addr in touched {
            let before = self
                .state
                .accounts
                .get(&addr)
                .map(|a| min_balance_of(&self.state, &self.schedule, a))
                .unwrap_or(self.schedule.account_base);
            let after = working
                .accounts
                .get(&addr)
                .map(|a| min_balance_of(&working, &self.schedule, a))
                .unwrap_or(self.schedule.account_base);
            self.costs
                .add_min_balance(addr, labels.label_for(&addr), after as i64 - before as i64);
        }
        self.state = working;
        self.groups_committed += 1;
        let time = self.state.now;
        let seq = self.groups_committed;
        self.log.extend(group.txns().iter().cloned().map(|txn| CommittedTxn { group: seq, time, txn }));
    }

    fn evaluate(&self, group: &TransactionGroup) -> (LedgerState, Result<(), Rejection>) {
        let mut working = self.state.clone();
        let outcome = self.evaluate_into(&mut working, group);
        (working, outcome)
    }

    fn evaluate_into(&self, w: &mut LedgerState, group: &TransactionGroup) -> Result<(), Rejection> {
        let txns = group.txns();
        if let Err(e) = TransactionGroup::new(txns.to_vec()) {
            return Err(Rejection { index: None, reason: RejectReason::GroupSize(e) });
        }
        let mut touched = BTreeSet::new();
        for (i, txn) in txns.iter().enumerate() {
            self.apply_txn(w, txns, i).map_err(|r| Rejection::at(i, r))?;
            touched.insert(txn.sender);
            touched.extend(involved_accounts(txn));
        }
        for addr in touched {
            if let Some(acct) = w.accounts.get(&addr) {
                let required = min_balance_of(w, &self.schedule, acct);
                if !acct.is_empty() && acct.balance.0 < required {
                    let index = txns.iter().rposition(|t| t.sender == addr || involved_accounts(t).contains(&addr));
                    return Err(Rejection {
                        index,
                        reason: RejectReason::MinBalance {
                            account: addr,
                            required: MicroAlgos(required),
                            balance: acct.balance,
                        },
                    });
                }
            }
        }
        Ok(())
    }

    fn apply_txn(&self, w: &mut LedgerState, group: &[Transaction], i: usize) -> Result<(), RejectReason> {
        let txn = &group[i];
        if txn.fee < MIN_FEE {
            return Err(RejectReason::FeeTooLow);
        }
        if txn.note.len() > MAX_NOTE_BYTES {
            return Err(RejectReason::NoteTooLarge);
        }
        if w.now < txn.first_valid || w.now > txn.last_valid {
            return Err(RejectReason::ClockWindow {
                now: w.now,
                first_valid: txn.first_valid,
                last_valid: txn.last_valid,
            });
        }
        match &txn.signature {
            SignatureKind::SecretKey(signer) => {
                if *signer != txn.sender || !w.keyed.contains(signer) {
                    return Err(RejectReason::BadSignature);
                }
            }
            SignatureKind::LogicSig(sig) => {
                let delegate_unkeyed = sig.delegator.is_some_and(|d| !w.keyed.contains(&d));
                if sig.authorizer() != txn.sender || delegate_unkeyed {
                    return Err(RejectReason::BadSignature);
                }
                eval_logic_signature(sig, group, i)
                    .map_err(|d| RejectReason::LogicRejected(format!("{}: {}", sig.program.name(), d)))?;
            }
        }

        let sender = w
            .accounts
            .get_mut(&txn.sender)
            .ok_or(RejectReason::UnknownAccount(txn.sender))?;
        sender.balance = sender
            .balance
            .checked_sub(txn.fee)
            .ok_or(RejectReason::InsufficientBalance { account: txn.sender })?;

        match &txn.kind {
            TxnKind::Payment { receiver, amount } => {
                let sender = w.accounts.get_mut(&txn.sender).expect("sender exists");
                sender.balance = sender
                    .balance
                    .checked_sub(*amount)
                    .ok_or(RejectReason::InsufficientBalance { account: txn.sender })?;
                let recv = w.accounts.entry(*receiver).or_default();
                recv.balance = recv.balance.checked_add(*amount).expect("microAlgo supply overflow");
                Ok(())
            }
            TxnKind::AssetTransfer { asset_id, receiver, amount, revoke_target } => {
                apply_asset_transfer(w, txn.sender, *asset_id, *receiver, *amount, *revoke_target)
            }
            TxnKind::AssetConfig { asset_id, clawback, freeze } => {
                let asset = w.assets.get_mut(asset_id).ok_or(RejectReason::UnknownAsset(*asset_id))?;
                if asset.manager != Some(txn.sender) {
                    return Err(RejectReason::NotManager);
                }
                asset.clawback = *clawback;
                asset.freeze = *freeze;
                Ok(())
            }
            TxnKind::AppCall { app_id, on_complete, update, .. } => {
                self.apply_app_call(w, group, i, *app_id, *on_complete, update.as_ref())
            }
        }
    }

    fn apply_app_call(
        &self,
        w: &mut LedgerState,
        group: &[Transaction],
        i: usize,
        app_id: AppId,
        on_complete: OnComplete,
        update: Option<&AppUpdate>,
    ) -> Result<(), RejectReason> {
        let sender = group[i].sender;
        let record = w.apps.get(&app_id).ok_or(RejectReason::UnknownApp(app_id))?;
        let program = self.programs.get(&app_id).expect("registered with its record").clone();
        let opted_in = w.accounts[&sender].local.contains_key(&app_id);

        match on_complete {
            OnComplete::UpdateApplication => {
                if record.creator != sender {
                    return Err(RejectReason::NotCreator);
                }
                if record.finalized {
                    return Err(RejectReason::Finalized(app_id));
                }
                let record = w.apps.get_mut(&app_id).expect("checked");
                if let Some(update) = update {
                    for (key, value) in &update.links {
                        record.config.insert(key.clone(), *value);
                    }
                    record.finalized |= update.finalize;
                }
                Ok(())
            }
            OnComplete::DeleteApplication => {
                if record.creator != sender {
                    return Err(RejectReason::NotCreator);
                }
                if record.finalized {
                    return Err(RejectReason::Finalized(app_id));
                }
                run_handler(w, group, i, app_id, |ctx| program.approve(ctx))?;
                w.apps.remove(&app_id);
                if let Some(creator) = w.accounts.get_mut(&sender) {
                    creator.created_apps.remove(&app_id);
                }
                Ok(())
            }
            OnComplete::OptIn => {
                if opted_in {
                    return Err(RejectReason::AlreadyOptedIn { account: sender });
                }
                w.accounts
                    .get_mut(&sender)
                    .expect("sender exists")
                    .local
                    .insert(app_id, KeyValueState::new());
                run_handler(w, group, i, app_id, |ctx| program.approve(ctx))
            }
            OnComplete::NoOp => run_handler(w, group, i, app_id, |ctx| program.approve(ctx)),
            OnComplete::CloseOut => {
                if !opted_in {
                    return Err(RejectReason::NotOptedInApp { account: sender, app: app_id });
                }
                run_handler(w, group, i, app_id, |ctx| program.approve(ctx))?;
                w.accounts.get_mut(&sender).expect("sender exists").local.remove(&app_id);
                Ok(())
            }
            OnComplete::ClearState => {
                if !opted_in {
                    return Err(RejectReason::NotOptedInApp { account: sender, app: app_id });
                }
                // The clear program's verdict only decides whether its writes land.
                let _ = run_handler(w, group, i, app_id, |ctx| program.clear_state(ctx));
                w.accounts.get_mut(&sender).expect("sender exists").local.remove(&app_id);
                Ok(())
            }
        }
    }
}

/// Builds an `UpdateApplication` call carrying `update`.
pub fn update_application(sender: Address, app: AppId, update: AppUpdate, now: Timestamp) -> Transaction {
    let mut txn = Transaction::app_call(sender, app, OnComplete::UpdateApplication, Vec::new(), now);
    if let TxnKind::AppCall { update: slot, .. } = &mut txn.kind {
        *slot = Some(update);
    }
    txn
}

fn run_handler(
    w: &mut LedgerState,
    group: &[Transaction],
    i: usize,
    app_id: AppId,
    handler: impl FnOnce(&mut CallContext<'_>) -> Result<(), Deny>,
) -> Result<(), RejectReason> {
    let mut ctx = CallContext::new(w, group, i, app_id);
    handler(&mut ctx).map_err(|d| RejectReason::AppRejected(d.0))?;
    let writes = ctx.into_writes();
    apply_writes(w, app_id, writes).map_err(|d| RejectReason::AppRejected(d.0))
}

fn apply_writes(w: &mut LedgerState, app_id: AppId, writes: StateWrites) -> Result<(), Deny> {
    let record = w.apps.get_mut(&app_id).expect("app exists");
    let schema = record.schema;
    for (key, value) in writes.global {
        match value {
            Some(v) => record.global.insert(key, v),
            None => record.global.remove(&key),
        };
    }
    StateSchema::admits(&record.global, schema.global_uints, schema.global_bytes)?;
    for (addr, entries) in writes.local {
        let local = w
            .accounts
            .get_mut(&addr)
            .and_then(|a| a.local.get_mut(&app_id))
            .ok_or_else(|| Deny::new(format!("account {} not opted in", addr.short())))?;
        for (key, value) in entries {
            match value {
                Some(v) => local.insert(key, v),
                None => local.remove(&key),
            };
        }
        StateSchema::admits(local, schema.local_uints, schema.local_bytes)?;
    }
    Ok(())
}

fn apply_asset_transfer(
    w: &mut LedgerState,
    sender: Address,
    asset_id: AssetId,
    receiver: Address,
    amount: u64,
    revoke_target: Option<Address>,
) -> Result<(), RejectReason> {
    let asset = w.assets.get(&asset_id).ok_or(RejectReason::UnknownAsset(asset_id))?;
    let default_frozen = asset.default_frozen;

    let source = match revoke_target {
        Some(target) => {
            if asset.clawback != Some(sender) {
                return Err(RejectReason::NotClawback);
            }
            target
        }
        None => {
            let acct = &w.accounts[&sender];
            if receiver == sender && amount == 0 && !acct.holdings.contains_key(&asset_id) {
                w.accounts
                    .get_mut(&sender)
                    .expect("sender exists")
                    .holdings
                    .insert(asset_id, AssetHolding { balance: 0, frozen: default_frozen });
                return Ok(());
            }
            sender
        }
    };

    let from = w
        .accounts
        .get(&source)
        .and_then(|a| a.holdings.get(&asset_id))
        .copied()
        .ok_or(RejectReason::NotOptedIn { account: source, asset: asset_id })?;
    if revoke_target.is_none() && from.frozen {
        return Err(RejectReason::FrozenHolding { account: source, asset: asset_id });
    }
    if !w.accounts.get(&receiver).is_some_and(|a| a.holdings.contains_key(&asset_id)) {
        return Err(RejectReason::NotOptedIn { account: receiver, asset: asset_id });
    }
    if from.balance < amount {
        return Err(RejectReason::InsufficientAssetBalance { account: source, asset: asset_id });
    }
    w.accounts.get_mut(&source).expect("checked").holdings.get_mut(&asset_id).expect("checked").balance -= amount;
    w.accounts.get_mut(&receiver).expect("checked").holdings.get_mut(&asset_id).expect("checked").balance += amount;
    Ok(())
}

/// Accounts other than the sender whose balances or holdings a transaction can change.
fn involved_accounts(txn: &Transaction) -> Vec<Address> {
    match &txn.kind {
        TxnKind::Payment { receiver, .. } => vec![*receiver],
        TxnKind::AssetTransfer { receiver, revoke_target, .. } => {
            let mut v = vec![*receiver];
            v.extend(revoke_target);
            v
        }
        TxnKind::AssetConfig { .. } => Vec::new(),
        TxnKind::AppCall { .. } => Vec::new(),
    }
}

fn min_balance_of(state: &LedgerState, schedule: &MinBalanceSchedule, acct: &Account) -> u64 {
    let assets = schedule.asset_opt_in * acct.holdings.len() as u64;
    let created: u64 = acct
        .created_apps
        .iter()
        .filter_map(|id| state.apps.get(id))
        .map(|app| schedule.app_creation(&app.schema))
        .sum();
    let opted: u64 = acct
        .local
        .keys()
        .filter_map(|id| state.apps.get(id))
        .map(|app| schedule.app_opt_in(&app.schema))
        .sum();
    schedule.account_base + assets + created + opted
}

#[cfg(test)]
mod tests;
