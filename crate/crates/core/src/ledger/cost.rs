use std::collections::BTreeMap;

use crate::programs::StateSchema;

use super::{Address, MicroAlgos};

/// Minimum-balance increments.
///
/// Application storage costs `app_base + per_uint * uints + per_byte_slice *
/// byte_slices`, using the global side of the schema for the creator and the
/// local side for each opted-in account.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MinBalanceSchedule {
    pub account_base: u64,
    pub asset_opt_in: u64,
    pub app_base: u64,
    pub per_uint: u64,
    pub per_byte_slice: u64,
}

impl Default for MinBalanceSchedule {
    fn default() -> Self {
        Self {
            account_base: 100_000,
            asset_opt_in: 100_000,
            app_base: 100_000,
            per_uint: 28_000,
            per_byte_slice: 50_000,
        }
    }
}

impl MinBalanceSchedule {
    pub fn app_creation(&self, schema: &StateSchema) -> u64 {
        self.app_base + self.per_uint * schema.global_uints + self.per_byte_slice * schema.global_bytes
    }

    pub fn app_opt_in(&self, schema: &StateSchema) -> u64 {
        self.app_base + self.per_uint * schema.local_uints + self.per_byte_slice * schema.local_bytes
    }
}

/// Cost attributed to one account under one action label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostRow {
    pub address: Address,
    pub label: String,
    /// microAlgos paid to other accounts.
    pub amount: u64,
    /// Net change of the account's minimum balance.
    pub min_balance: i64,
    pub fee: u64,
}

impl CostRow {
    pub fn total(&self) -> i64 {
        self.amount as i64 + self.min_balance + self.fee as i64
    }
}

/// Per-account accumulation of fees, payments and minimum-balance obligations.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CostLedger {
    rows: Vec<CostRow>,
    index: BTreeMap<(Address, String), usize>,
}

impl CostLedger {
    fn row_mut(&mut self, address: Address, label: &str) -> &mut CostRow {
        let key = (address, label.to_owned());
        let idx = match self.index.get(&key) {
            Some(i) => *i,
            None => {
                self.rows.push(CostRow {
                    address,
                    label: label.to_owned(),
                    amount: 0,
                    min_balance: 0,
                    fee: 0,
                });
                self.index.insert(key, self.rows.len() - 1);
                self.rows.len() - 1
            }
        };
        &mut self.rows[idx]
    }

    pub(crate) fn add_fee(&mut self, address: Address, label: &str, fee: MicroAlgos) {
        self.row_mut(address, label).fee += fee.0;
    }

    pub(crate) fn add_amount(&mut self, address: Address, label: &str, amount: MicroAlgos) {
        self.row_mut(address, label).amount += amount.0;
    }

    pub(crate) fn add_min_balance(&mut self, address: Address, label: &str, delta: i64) {
        if delta != 0 {
            self.row_mut(address, label).min_balance += delta;
        }
    }

    /// Rows in order of first appearance.
    pub fn rows(&self) -> &[CostRow] {
        &self.rows
    }

    pub fn rows_for(&self, address: &Address) -> impl Iterator<Item = &CostRow> + '_ {
        let address = *address;
        self.rows.iter().filter(move |r| r.address == address)
    }

    pub fn row(&self, address: &Address, label: &str) -> Option<&CostRow> {
        self.index.get(&(*address, label.to_owned())).map(|i| &self.rows[*i])
    }

    pub fn fees_paid(&self, address: &Address) -> MicroAlgos {
        MicroAlgos(self.rows_for(address).map(|r| r.fee).sum())
    }

    /// Sum of the minimum-balance increments currently held by the account
    /// (everything above the account base).
    pub fn min_balance_locked(&self, address: &Address) -> MicroAlgos {
        let sum: i64 = self.rows_for(address).map(|r| r.min_balance).sum();
        MicroAlgos(sum.max(0) as u64)
    }

    pub fn total_for(&self, address: &Address) -> i64 {
        self.rows_for(address).map(CostRow::total).sum()
    }
}

/// Labels under which the costs of a submitted group are recorded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostLabels {
    default: String,
    by_sender: Vec<(Address, String)>,
}

impl CostLabels {
    pub fn new(default: impl Into<String>) -> Self {
        Self { default: default.into(), by_sender: Vec::new() }
    }

    pub fn with_sender(mut self, address: Address, label: impl Into<String>) -> Self {
        self.by_sender.push((address, label.into()));
        self
    }

    pub fn label_for(&self, address: &Address) -> &str {
        self.by_sender
            .iter()
            .find(|(a, _)| a == address)
            .map(|(_, l)| l.as_str())
            .unwrap_or(&self.default)
    }
}

impl From<&str> for CostLabels {
    fn from(label: &str) -> Self {
        Self::new(label)
    }
}
