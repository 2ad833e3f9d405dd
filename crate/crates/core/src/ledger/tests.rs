use super::*;
use crate::programs::{ensure, LogicProgram, LogicSig, StatelessProgram};

const ALGO: u64 = 1_000_000;

fn funded(ledger: &mut Ledger, algos: u64) -> Address {
    let a = ledger.create_account();
    ledger.fund_algos(&a, MicroAlgos(algos * ALGO)).unwrap();
    a
}

fn pay(from: Address, to: Address, amount: u64, now: Timestamp) -> TransactionGroup {
    TransactionGroup::single(Transaction::payment(from, to, MicroAlgos(amount), now))
}

fn code(r: Result<(), Rejection>) -> &'static str {
    r.unwrap_err().reason.code()
}

fn plain_asset(creator: Address, total: u64) -> AssetParams {
    AssetParams { total, decimals: 0, default_frozen: false, manager: Some(creator), freeze: None, clawback: None }
}

/// Counts calls globally and per opted-in account; denies "fail".
#[derive(Debug)]
struct Counter;

impl StatefulProgram for Counter {
    fn name(&self) -> &str {
        "Counter"
    }

    fn schema(&self) -> StateSchema {
        StateSchema { global_uints: 1, global_bytes: 0, local_uints: 1, local_bytes: 0 }
    }

    fn approve(&self, ctx: &mut CallContext<'_>) -> Result<(), Deny> {
        match ctx.on_complete() {
            OnComplete::OptIn => {
                let me = ctx.sender();
                ctx.local_put(&me, b"n", 0u64)
            }
            OnComplete::NoOp => {
                ensure(ctx.arg(0) != Some(b"fail"), || "told to fail".into())?;
                let n = ctx.global_uint(b"n");
                ctx.global_put(b"n", n + 1);
                let me = ctx.sender();
                let mine = ctx.local_uint(&me, b"n")?;
                ctx.local_put(&me, b"n", mine + 1)
            }
            OnComplete::CloseOut => Ok(()),
            _ => Err(Deny::new("unsupported")),
        }
    }

    fn clear_state(&self, _: &mut CallContext<'_>) -> Result<(), Deny> {
        Err(Deny::new("clear state always runs anyway"))
    }
}

fn call(sender: Address, app: AppId, oc: OnComplete, arg: &[u8], now: Timestamp) -> TransactionGroup {
    let args = if arg.is_empty() { Vec::new() } else { vec![arg.to_vec()] };
    TransactionGroup::single(Transaction::app_call(sender, app, oc, args, now))
}

#[test]
fn payment_moves_amount_and_fee() {
    let mut l = Ledger::new();
    let a = funded(&mut l, 5);
    let b = l.create_account();
    l.submit_group(&pay(a, b, 200_000, 0)).unwrap();
    assert_eq!(l.balance(&a).0, 5 * ALGO - 201_000);
    assert_eq!(l.balance(&b).0, 200_000);
    assert_eq!(l.costs().fees_paid(&a).0, 1_000);
    assert_eq!(l.log().len(), 1);
}

#[test]
fn new_receivers_need_the_account_minimum() {
    let mut l = Ledger::new();
    let a = funded(&mut l, 5);
    let b = l.create_account();
    assert_eq!(code(l.submit_group(&pay(a, b, 99_999, 0))), "min-balance");
    assert_eq!(l.balance(&b).0, 0);
}

#[test]
fn sender_cannot_dip_below_minimum() {
    let mut l = Ledger::new();
    let a = l.create_account();
    l.fund_algos(&a, MicroAlgos(300_000)).unwrap();
    let b = funded(&mut l, 1);
    assert_eq!(code(l.submit_group(&pay(a, b, 200_000, 0))), "min-balance");
    l.submit_group(&pay(a, b, 199_000, 0)).unwrap();
    assert_eq!(l.balance(&a).0, 100_000);
}

#[test]
fn closing_to_empty_is_exempt_from_minimum() {
    let mut l = Ledger::new();
    let a = l.create_account();
    l.fund_algos(&a, MicroAlgos(301_000)).unwrap();
    let b = funded(&mut l, 1);
    l.submit_group(&pay(a, b, 300_000, 0)).unwrap();
    assert_eq!(l.balance(&a).0, 0);
}

#[test]
fn static_checks() {
    let mut l = Ledger::new();
    let a = funded(&mut l, 5);
    let b = funded(&mut l, 1);
    let mut cheap = Transaction::payment(a, b, MicroAlgos(1), 0);
    cheap.fee = MicroAlgos(999);
    assert_eq!(code(l.submit_group(&TransactionGroup::single(cheap))), "fee-too-low");

    let noisy = Transaction::payment(a, b, MicroAlgos(1), 0).with_note(vec![0u8; MAX_NOTE_BYTES + 1]);
    assert_eq!(code(l.submit_group(&TransactionGroup::single(noisy))), "note-too-large");
    let fits = Transaction::payment(a, b, MicroAlgos(1), 0).with_note(vec![0u8; MAX_NOTE_BYTES]);
    l.submit_group(&TransactionGroup::single(fits)).unwrap();

    let forged = Transaction::payment(a, b, MicroAlgos(1), 0).with_signature(SignatureKind::SecretKey(b));
    assert_eq!(code(l.submit_group(&TransactionGroup::single(forged))), "bad-signature");

    // Nobody holds a key for an address the ledger never created.
    let unknown = Address::derive(b"test", b"nobody");
    assert_eq!(code(l.submit_group(&pay(unknown, b, 1, 0))), "bad-signature");
}

#[test]
fn group_size_bounds() {
    assert!(TransactionGroup::new(Vec::new()).is_err());
    let a = Address::derive(b"test", b"a");
    let txns = vec![Transaction::payment(a, a, MicroAlgos::ZERO, 0); MAX_GROUP_SIZE + 1];
    assert!(TransactionGroup::new(txns[..MAX_GROUP_SIZE].to_vec()).is_ok());
    assert!(TransactionGroup::new(txns).is_err());
}

#[test]
fn validity_window() {
    let mut l = Ledger::new();
    let a = funded(&mut l, 5);
    let b = funded(&mut l, 1);
    let stale = Transaction::payment(a, b, MicroAlgos(1), 0).with_last_valid(10);
    l.advance_time(11).unwrap();
    assert_eq!(code(l.submit_group(&TransactionGroup::single(stale))), "clock-window");
    let early = Transaction::payment(a, b, MicroAlgos(1), 50);
    assert_eq!(code(l.submit_group(&TransactionGroup::single(early))), "clock-window");
    assert!(matches!(l.advance_time(5), Err(LedgerError::TimeReversal { .. })));
}

#[test]
fn groups_are_all_or_nothing() {
    let mut l = Ledger::new();
    let a = funded(&mut l, 5);
    let b = funded(&mut l, 1);
    let before = l.clone();
    let g = TransactionGroup::new(vec![
        Transaction::payment(a, b, MicroAlgos(1_000), 0),
        Transaction::payment(b, a, MicroAlgos(10 * ALGO), 0),
    ])
    .unwrap();
    let r = l.submit_group(&g).unwrap_err();
    assert_eq!(r.index, Some(1));
    assert_eq!(r.reason.code(), "insufficient-balance");
    assert_eq!(l, before);
}

#[test]
fn dry_run_reports_halt_state_without_committing() {
    let mut l = Ledger::new();
    let a = funded(&mut l, 5);
    let b = funded(&mut l, 1);
    let before = l.clone();
    let g = TransactionGroup::new(vec![
        Transaction::payment(a, b, MicroAlgos(1_000), 0),
        Transaction::payment(b, a, MicroAlgos(10 * ALGO), 0),
    ])
    .unwrap();
    let (outcome, halted) = l.dry_run(&g);
    assert!(outcome.is_err());
    // The failing payment's fee was already deducted when evaluation stopped.
    assert_eq!(halted.balance(&a).0, 5 * ALGO - 2_000);
    assert_eq!(halted.balance(&b).0, ALGO);
    assert_eq!(l, before);
    l.submit_group(&pay(a, b, 5, 0)).unwrap();
}

#[test]
fn assets_opt_in_transfer_and_freeze() {
    let mut l = Ledger::new();
    let creator = funded(&mut l, 5);
    let holder = funded(&mut l, 5);
    let asset = l.create_asset(&creator, plain_asset(creator, 1_000)).unwrap();
    assert_eq!(l.asset_balance(&creator, asset), 1_000);
    assert_eq!(l.min_balance(&creator).unwrap().0, 200_000);

    let send = |n| TransactionGroup::single(Transaction::asset_transfer(creator, asset, holder, n, 0));
    assert_eq!(code(l.submit_group(&send(10))), "not-opted-in");
    l.opt_in_asset(&holder, asset).unwrap();
    assert_eq!(l.min_balance(&holder).unwrap().0, 200_000);
    l.submit_group(&send(10)).unwrap();
    assert_eq!(l.asset_balance(&holder, asset), 10);
    assert_eq!(code(l.submit_group(&send(1_000))), "insufficient-asset-balance");
    assert_eq!(l.asset_circulating_total(asset), 1_000);
}

#[test]
fn frozen_holdings_move_only_by_clawback() {
    let mut l = Ledger::new();
    let creator = funded(&mut l, 5);
    let holder = funded(&mut l, 5);
    let other = funded(&mut l, 5);
    let params = AssetParams { default_frozen: true, clawback: Some(creator), ..plain_asset(creator, 100) };
    let asset = l.create_asset(&creator, params).unwrap();
    l.opt_in_asset(&holder, asset).unwrap();
    l.opt_in_asset(&other, asset).unwrap();

    // The creator's holding is never frozen by default.
    let plain = TransactionGroup::single(Transaction::asset_transfer(creator, asset, holder, 1, 0));
    l.submit_group(&plain).unwrap();
    let claw = |from, to| TransactionGroup::single(Transaction::clawback(creator, asset, from, to, 5, 0));
    l.submit_group(&claw(creator, holder)).unwrap();
    assert_eq!(l.asset_balance(&holder, asset), 6);

    let escape = TransactionGroup::single(Transaction::asset_transfer(holder, asset, other, 5, 0));
    assert_eq!(code(l.submit_group(&escape)), "frozen-holding");
    let thief = TransactionGroup::single(Transaction::clawback(other, asset, holder, other, 5, 0));
    assert_eq!(code(l.submit_group(&thief)), "not-clawback");
    l.submit_group(&claw(holder, other)).unwrap();
    assert_eq!(l.asset_balance(&holder, asset), 1);
    assert_eq!(l.asset_balance(&other, asset), 5);
}

#[test]
fn asset_config_needs_manager() {
    let mut l = Ledger::new();
    let creator = funded(&mut l, 5);
    let stranger = funded(&mut l, 5);
    let asset = l.create_asset(&creator, plain_asset(creator, 10)).unwrap();
    let cfg = |sender| {
        TransactionGroup::single(Transaction::new(
            sender,
            TxnKind::AssetConfig { asset_id: asset, clawback: Some(stranger), freeze: None },
            0,
        ))
    };
    assert_eq!(code(l.submit_group(&cfg(stranger))), "not-manager");
    l.submit_group(&cfg(creator)).unwrap();
    assert_eq!(l.asset(asset).unwrap().clawback, Some(stranger));
}

#[test]
fn stateful_writes_commit_only_on_approval() {
    let mut l = Ledger::new();
    let creator = funded(&mut l, 5);
    let user = funded(&mut l, 5);
    let app = l.register_stateful(Arc::new(Counter), &creator).unwrap();
    assert_eq!(l.min_balance(&creator).unwrap().0, 100_000 + 128_000);
    assert_eq!(l.costs().row(&creator, "Deploy Counter").unwrap().min_balance, 128_000);

    // Calls without opting in run, but cannot write the caller's local state.
    assert_eq!(code(l.submit_group(&call(user, app, OnComplete::NoOp, b"", 0))), "app-rejected");
    assert_eq!(code(l.submit_group(&call(user, app, OnComplete::CloseOut, b"", 0))), "not-opted-in-app");
    l.submit_group(&call(user, app, OnComplete::OptIn, b"", 0)).unwrap();
    assert_eq!(l.min_balance(&user).unwrap().0, 228_000);
    l.submit_group(&call(user, app, OnComplete::NoOp, b"", 0)).unwrap();
    l.submit_group(&call(user, app, OnComplete::NoOp, b"", 0)).unwrap();
    assert_eq!(l.global_value(app, b"n").unwrap().as_uint(), Some(2));

    // A later failure in the same group discards the call's writes.
    let g = TransactionGroup::new(vec![
        Transaction::app_call(user, app, OnComplete::NoOp, Vec::new(), 0),
        Transaction::app_call(user, app, OnComplete::NoOp, vec![b"fail".to_vec()], 0),
    ])
    .unwrap();
    let r = l.submit_group(&g).unwrap_err();
    assert_eq!((r.index, r.reason.code()), (Some(1), "app-rejected"));
    assert_eq!(l.global_value(app, b"n").unwrap().as_uint(), Some(2));
    assert_eq!(l.local_value(&user, app, b"n").unwrap().as_uint(), Some(2));
}

#[test]
fn clear_state_always_removes_local_state() {
    let mut l = Ledger::new();
    let creator = funded(&mut l, 5);
    let user = funded(&mut l, 5);
    let app = l.register_stateful(Arc::new(Counter), &creator).unwrap();
    l.submit_group(&call(user, app, OnComplete::OptIn, b"", 0)).unwrap();
    l.submit_group(&call(user, app, OnComplete::ClearState, b"", 0)).unwrap();
    assert!(l.local_state(&user, app).is_none());
    assert_eq!(l.min_balance(&user).unwrap().0, 100_000);
}

#[test]
fn updates_need_creator_and_stop_after_finalize() {
    let mut l = Ledger::new();
    let creator = funded(&mut l, 5);
    let other = funded(&mut l, 5);
    let app = l.register_stateful(Arc::new(Counter), &creator).unwrap();
    assert!(l.link_escrow(app, "escrow", other, &other).is_err());
    l.link_escrow(app, "escrow", other, &creator).unwrap();
    assert_eq!(l.app_config(app, "escrow"), Some(ConfigValue::Address(other)));
    l.finalize_deployment(app, &creator).unwrap();
    let err = l.link_escrow(app, "escrow", creator, &creator).unwrap_err();
    assert!(matches!(err, LedgerError::Rejected(Rejection { reason: RejectReason::Finalized(_), .. })));
    assert_eq!(l.costs().row(&creator, "Update Apps").unwrap().fee, 2_000);
}

#[derive(Debug)]
struct Capped(u64);

impl LogicProgram for Capped {
    fn name(&self) -> &str {
        "capped"
    }

    fn identity(&self) -> Vec<u8> {
        itob(self.0)
    }

    fn approve(&self, group: &[Transaction], index: usize, _: &[Vec<u8>]) -> Result<(), Deny> {
        match &group[index].kind {
            TxnKind::Payment { amount, .. } => ensure(amount.0 <= self.0, || "over cap".into()),
            _ => Err(Deny::new("payments only")),
        }
    }
}

#[test]
fn contract_accounts_spend_under_their_program() {
    let mut l = Ledger::new();
    let funder = funded(&mut l, 5);
    let program = StatelessProgram::new(Capped(1_000));
    let escrow = crate::programs::contract_account_address(&program);
    l.submit_group(&pay(funder, escrow, 500_000, 0)).unwrap();
    let sig = SignatureKind::LogicSig(LogicSig::contract(program));
    let spend = |n| TransactionGroup::single(Transaction::payment(escrow, funder, MicroAlgos(n), 0).with_signature(sig.clone()));
    assert_eq!(code(l.submit_group(&spend(1_001))), "logic-rejected");
    l.submit_group(&spend(1_000)).unwrap();
    let unsigned = pay(escrow, funder, 1, 0);
    assert_eq!(code(l.submit_group(&unsigned)), "bad-signature");
}

#[test]
fn cost_labels_route_per_sender() {
    let mut l = Ledger::new();
    let a = funded(&mut l, 5);
    let b = funded(&mut l, 5);
    let g = TransactionGroup::new(vec![
        Transaction::payment(a, b, MicroAlgos(7), 0),
        Transaction::payment(b, a, MicroAlgos(3), 0),
    ])
    .unwrap();
    l.submit_group_as(&g, &CostLabels::new("Swap").with_sender(b, "Swap back")).unwrap();
    let ra = l.costs().row(&a, "Swap").unwrap();
    assert_eq!((ra.amount, ra.fee), (7, 1_000));
    let rb = l.costs().row(&b, "Swap back").unwrap();
    assert_eq!((rb.amount, rb.fee), (3, 1_000));
    assert!(l.costs().row(&b, "Swap").is_none());
}

#[test]
fn creation_needs_room_for_the_new_minimum() {
    let mut l = Ledger::new();
    let poor = l.create_account();
    l.fund_algos(&poor, MicroAlgos(200_000)).unwrap();
    assert!(matches!(
        l.create_asset(&poor, plain_asset(poor, 1)),
        Err(LedgerError::InsufficientBalance { .. })
    ));
    assert_eq!(l.balance(&poor).0, 200_000);
}
