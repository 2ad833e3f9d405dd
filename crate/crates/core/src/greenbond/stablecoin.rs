use crate::ledger::{Address, AssetId, AssetParams, Ledger, LedgerError, Rejection, Transaction, TransactionGroup};

/// Supply of the test stablecoin, in base units.
pub const STABLECOIN_SUPPLY: u64 = 1_000_000_000_000;

/// Creates a freely transferable stablecoin with 6 decimals held by `creator`.
pub fn create_stablecoin(ledger: &mut Ledger, creator: &Address) -> Result<AssetId, LedgerError> {
    ledger.create_asset(
        creator,
        AssetParams {
            total: STABLECOIN_SUPPLY,
            decimals: 6,
            default_frozen: false,
            manager: None,
            freeze: None,
            clawback: None,
        },
    )
}

/// Plain asset transfer, recorded under `label`.
pub fn transfer_asset(
    ledger: &mut Ledger,
    asset: AssetId,
    from: &Address,
    to: &Address,
    amount: u64,
    label: &str,
) -> Result<(), Rejection> {
    let txn = Transaction::asset_transfer(*from, asset, *to, amount, ledger.now());
    ledger.submit_group_as(&TransactionGroup::single(txn), &label.into())
}
