//! The green-bond protocol.
//!
//! A bond is two stateful applications and two contract accounts:
//!
//! * `Main` keeps the coupon bookkeeping, the reserve and the regulator's
//!   freeze flags, and approves buys, trades, coupons, principal and default
//!   claims.
//! * `Manage` stores the packed green ratings and checks the stablecoin
//!   escrow can meet what the bond owes.
//! * The bond escrow holds the unsold supply and is the clawback authority of
//!   the bond asset, so bonds only move inside groups that `Main` approves.
//! * The stablecoin escrow holds the issuer's coupon and principal funds.
//!
//! [`issue`] deploys all of it; [`BondDeployment`] builds and submits the
//! atomic groups for every protocol action.

mod coupon;
mod deploy;
mod escrow;
mod legs;
mod main_app;
mod manage_app;
mod ratings;
mod stablecoin;

pub use coupon::{coupon_round_at, display_usd, effective_coupon, scale, RatingError, UNIT};
pub use deploy::{issue, labels, BondDeployment, TradeOffer, BOND_ESCROW_FUNDING, STABLECOIN_ESCROW_FUNDING};
pub use escrow::{BondEscrow, StablecoinEscrow, TradeOfferProgram};
pub use main_app::MainApp;
pub use manage_app::ManageApp;
pub use stablecoin::{create_stablecoin, transfer_asset, STABLECOIN_SUPPLY};
pub use ratings::{rating_key, ratings_per_key, read_packed, write_packed, RATINGS_PER_VALUE};

use crate::ledger::{Address, AssetId, LedgerError, Rejection, Timestamp};

/// Global and local state keys of `Main`.
pub mod keys {
    pub const COUPONS_PAID: &[u8] = b"CouponsPaid";
    pub const RESERVE: &[u8] = b"Reserve";
    pub const FROZEN: &[u8] = b"Frozen";
    pub const TRADE: &[u8] = b"Trade";
}

/// Configuration entries linked into the applications at deployment.
pub mod links {
    pub const BOND_ESCROW: &str = "bond_escrow";
    pub const STABLECOIN_ESCROW: &str = "stablecoin_escrow";
    pub const MAIN_APP: &str = "main_app";
    pub const MANAGE_APP: &str = "manage_app";
    pub const BOND_ID: &str = "bond_id";
}

/// Application-call action strings.
pub mod actions {
    pub const FREEZE_ALL: &str = "freeze_all";
    pub const FREEZE: &str = "freeze";
    pub const BUY: &str = "buy";
    pub const SET_TRADE: &str = "set_trade";
    pub const TRADE: &str = "trade";
    pub const COUPON: &str = "coupon";
    pub const SELL: &str = "sell";
    pub const DEFAULT: &str = "default";
    pub const RATE: &str = "rate";
    pub const NOT_DEFAULTED: &str = "not_defaulted";
    pub const DEFAULTED: &str = "defaulted";
    pub const CLAIM_DEFAULT: &str = "claim_default";
}

/// Terms of a bond. Money amounts are stablecoin base units; per-bond
/// amounts refer to one whole bond (10^6 bond base units).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BondParams {
    pub total_bonds: u64,
    pub coupon_rounds: u64,
    pub start_buy: Timestamp,
    pub end_buy: Timestamp,
    pub maturity: Timestamp,
    pub bond_cost: u64,
    /// Coupon per bond per round at a five-star rating.
    pub coupon_base: u64,
    pub principal: u64,
    pub issuer: Address,
    pub green_verifier: Address,
    pub financial_regulator: Address,
    pub stablecoin_id: AssetId,
}

impl BondParams {
    pub fn validate(&self) -> Result<(), GreenBondError> {
        let invalid = |m: &str| Err(GreenBondError::InvalidParams(m.to_owned()));
        if !(self.start_buy < self.end_buy && self.end_buy < self.maturity) {
            return invalid("dates must satisfy start_buy < end_buy < maturity");
        }
        if self.principal == 0 {
            return invalid("principal must be positive");
        }
        if self.total_bonds == 0 {
            return invalid("at least one bond must be minted");
        }
        if self.total_bonds.checked_mul(UNIT).is_none() {
            return invalid("bond supply overflows");
        }
        if self.maturity - self.end_buy < self.coupon_rounds {
            return invalid("coupon period would be shorter than one second");
        }
        if self.coupon_rounds + 1 > 8 * crate::programs::MAX_GLOBAL_PAIRS {
            return invalid("too many coupon rounds to store their ratings");
        }
        Ok(())
    }

    /// Bond base units minted.
    pub fn supply(&self) -> u64 {
        self.total_bonds * UNIT
    }

    /// Seconds per coupon period.
    pub fn coupon_period(&self) -> Option<u64> {
        (self.coupon_rounds > 0).then(|| (self.maturity - self.end_buy) / self.coupon_rounds)
    }

    /// Number of packed rating values the ratings application stores.
    pub fn rating_slots(&self) -> u64 {
        ratings_per_key(self.coupon_rounds)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GreenBondError {
    #[error("invalid bond parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Rating(#[from] RatingError),
    #[error("rating index {index} out of range 0..={max}")]
    RatingIndex { index: u64, max: u64 },
    #[error("{0} holds no bonds")]
    NoHoldings(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("group rejected: {0}")]
    Rejected(#[from] Rejection),
}

#[cfg(test)]
mod tests;
