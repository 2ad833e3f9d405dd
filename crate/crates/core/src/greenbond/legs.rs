//! Shape checks for the transactions grouped with a protocol call.

use crate::ledger::{Address, AppId, AssetId, OnComplete, Transaction, TxnKind};
use crate::programs::{ensure, Deny};

pub(crate) fn expect_len(group: &[Transaction], len: usize, what: &str) -> Result<(), Deny> {
    ensure(group.len() == len, || {
        format!("{what} expects a group of {len} transactions, got {}", group.len())
    })
}

fn leg(group: &[Transaction], i: usize) -> Result<&Transaction, Deny> {
    group.get(i).ok_or_else(|| Deny::new(format!("missing transaction {i}")))
}

/// Transaction `i` must pay microAlgos from `from` to `to`; returns the amount.
pub(crate) fn payment(group: &[Transaction], i: usize, from: Address, to: Address) -> Result<u64, Deny> {
    let t = leg(group, i)?;
    match &t.kind {
        TxnKind::Payment { receiver, amount } if t.sender == from && *receiver == to => Ok(amount.0),
        _ => Err(Deny::new(format!("transaction {i} must be a payment {} -> {}", from.short(), to.short()))),
    }
}

/// Transaction `i` must transfer `asset`. `revoke` is the expected clawback
/// source, or `None` for an ordinary transfer. Returns the amount.
pub(crate) fn asset_transfer(
    group: &[Transaction],
    i: usize,
    asset: AssetId,
    sender: Address,
    revoke: Option<Address>,
    receiver: Address,
) -> Result<u64, Deny> {
    let t = leg(group, i)?;
    match &t.kind {
        TxnKind::AssetTransfer { asset_id, receiver: r, amount, revoke_target }
            if *asset_id == asset && t.sender == sender && *revoke_target == revoke && *r == receiver =>
        {
            Ok(*amount)
        }
        _ => Err(Deny::new(format!("transaction {i} must transfer asset {asset} to {}", receiver.short()))),
    }
}

/// Transaction `i` must be a NoOp call of `app` with first argument `action`.
pub(crate) fn app_call<'a>(
    group: &'a [Transaction],
    i: usize,
    app: AppId,
    action: &str,
) -> Result<&'a Transaction, Deny> {
    let t = leg(group, i)?;
    match &t.kind {
        TxnKind::AppCall { app_id, on_complete: OnComplete::NoOp, .. }
            if *app_id == app && t.app_action() == Some(action.as_bytes()) =>
        {
            Ok(t)
        }
        _ => Err(Deny::new(format!("transaction {i} must call application {app} with \"{action}\""))),
    }
}

/// First argument of transaction `i` if it is a NoOp call of `app`.
pub(crate) fn action_of(group: &[Transaction], i: usize, app: AppId) -> Option<&[u8]> {
    match &group.get(i)?.kind {
        TxnKind::AppCall { app_id, on_complete: OnComplete::NoOp, args, .. } if *app_id == app => {
            args.first().map(Vec::as_slice)
        }
        _ => None,
    }
}
