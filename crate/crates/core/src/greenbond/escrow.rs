use crate::ledger::{Address, AppId, AssetId, Timestamp, Transaction, TxnKind, MIN_FEE};
use crate::programs::{ensure, Deny, LogicProgram};

use super::{actions, legs, scale};

fn identity(tag: &str, fields: &[u64]) -> Vec<u8> {
    let mut bytes = tag.as_bytes().to_vec();
    for f in fields {
        bytes.extend_from_slice(&f.to_be_bytes());
    }
    bytes
}

/// Escrow transactions pay exactly the flat fee, so nobody can drain the
/// account through inflated fees.
fn flat_fee(txn: &Transaction) -> Result<(), Deny> {
    ensure(txn.fee == MIN_FEE, || format!("escrow transactions pay exactly {} fee", MIN_FEE.0))
}

/// A lone zero-amount transfer of `asset` to itself opts the escrow in.
fn is_opt_in(group: &[Transaction], index: usize, asset: AssetId) -> bool {
    let txn = &group[index];
    group.len() == 1
        && matches!(
            &txn.kind,
            TxnKind::AssetTransfer { asset_id, receiver, amount: 0, revoke_target: None }
                if *asset_id == asset && *receiver == txn.sender
        )
}

/// Holds unsold bonds and acts as the bond's clawback authority. Its only
/// spend is the clawback transfer of a group that `Main` approves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BondEscrow {
    pub main_app: AppId,
    pub bond_id: AssetId,
}

impl LogicProgram for BondEscrow {
    fn name(&self) -> &str {
        "bond escrow"
    }

    fn identity(&self) -> Vec<u8> {
        identity("bond-escrow", &[self.main_app.0, self.bond_id.0])
    }

    fn approve(&self, group: &[Transaction], index: usize, _args: &[Vec<u8>]) -> Result<(), Deny> {
        let txn = &group[index];
        flat_fee(txn)?;
        if is_opt_in(group, index, self.bond_id) {
            return Ok(());
        }
        ensure(index == 2, || "bond escrow only signs transaction 2".into())?;
        ensure(
            matches!(&txn.kind, TxnKind::AssetTransfer { asset_id, revoke_target: Some(_), .. } if *asset_id == self.bond_id),
            || "bond escrow only signs bond clawback transfers".into(),
        )?;
        let action = legs::action_of(group, 0, self.main_app);
        let allowed = [actions::BUY, actions::TRADE, actions::SELL, actions::DEFAULT];
        ensure(allowed.iter().any(|a| action == Some(a.as_bytes())), || {
            "bond transfer must be grouped with a Main buy, trade, sell or default call".into()
        })
    }
}

/// Holds the issuer's stablecoin for coupons and principal. It pays out only
/// inside groups that call both `Main` and `Manage`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StablecoinEscrow {
    pub main_app: AppId,
    pub manage_app: AppId,
    pub stablecoin_id: AssetId,
}

impl LogicProgram for StablecoinEscrow {
    fn name(&self) -> &str {
        "stablecoin escrow"
    }

    fn identity(&self) -> Vec<u8> {
        identity(
            "stablecoin-escrow",
            &[self.main_app.0, self.manage_app.0, self.stablecoin_id.0],
        )
    }

    fn approve(&self, group: &[Transaction], index: usize, _args: &[Vec<u8>]) -> Result<(), Deny> {
        let txn = &group[index];
        flat_fee(txn)?;
        if is_opt_in(group, index, self.stablecoin_id) {
            return Ok(());
        }
        ensure(index == 3, || "stablecoin escrow only signs transaction 3".into())?;
        ensure(
            matches!(&txn.kind, TxnKind::AssetTransfer { asset_id, revoke_target: None, .. } if *asset_id == self.stablecoin_id),
            || "stablecoin escrow only signs stablecoin transfers".into(),
        )?;
        let action = legs::action_of(group, 0, self.main_app);
        let allowed = [actions::COUPON, actions::SELL, actions::DEFAULT];
        ensure(allowed.iter().any(|a| action == Some(a.as_bytes())), || {
            "payout must be grouped with a Main coupon, sell or default call".into()
        })?;
        ensure(legs::action_of(group, 1, self.manage_app).is_some(), || {
            "payout must be grouped with a Manage call".into()
        })
    }
}

/// Terms a seller signs to let anyone buy up to their trade allowance.
///
/// The program cannot see ledger state, so it only checks the shape of the
/// group and the price; `Main` enforces and decrements the allowance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TradeOfferProgram {
    pub seller: Address,
    /// Stablecoin base units per whole bond.
    pub price: u64,
    pub expiry: Timestamp,
    pub main_app: AppId,
    pub bond_escrow: Address,
    pub bond_id: AssetId,
    pub stablecoin_id: AssetId,
}

impl LogicProgram for TradeOfferProgram {
    fn name(&self) -> &str {
        "trade offer"
    }

    fn identity(&self) -> Vec<u8> {
        let mut bytes = identity(
            "trade-offer",
            &[self.price, self.expiry, self.main_app.0, self.bond_id.0, self.stablecoin_id.0],
        );
        bytes.extend_from_slice(self.seller.as_bytes());
        bytes.extend_from_slice(self.bond_escrow.as_bytes());
        bytes
    }

    fn approve(&self, group: &[Transaction], index: usize, _args: &[Vec<u8>]) -> Result<(), Deny> {
        legs::expect_len(group, 4, "trade offer")?;
        let txn = &group[index];
        flat_fee(txn)?;
        ensure(txn.last_valid < self.expiry, || {
            format!("offer expired at {}; transaction valid until {}", self.expiry, txn.last_valid)
        })?;
        match index {
            0 => {
                legs::app_call(group, 0, self.main_app, actions::TRADE)?;
            }
            1 => {
                let fee = legs::payment(group, 1, self.seller, self.bond_escrow)?;
                ensure(fee == group[2].fee.0, || "fee payment must equal the escrow fee".into())?;
            }
            _ => return Err(Deny::new("trade offer only signs transactions 0 and 1")),
        }
        let buyer = match &group[2].kind {
            TxnKind::AssetTransfer { receiver, .. } => *receiver,
            _ => return Err(Deny::new("transaction 2 must transfer the bond")),
        };
        let n = legs::asset_transfer(group, 2, self.bond_id, self.bond_escrow, Some(self.seller), buyer)?;
        let paid = legs::asset_transfer(group, 3, self.stablecoin_id, buyer, None, self.seller)?;
        let price = scale(n, self.price);
        ensure(u128::from(paid) == price, || format!("buyer must pay {price}, offered {paid}"))
    }
}
