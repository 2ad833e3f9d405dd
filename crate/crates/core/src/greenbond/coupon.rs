use crate::ledger::Timestamp;

use super::BondParams;

/// Base units per whole bond and per stablecoin dollar (both use 6 decimals).
pub const UNIT: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum RatingError {
    #[error("rating {0} outside 1..=5")]
    OutOfRange(u64),
    #[error("coupon overflows for base {0}")]
    Overflow(u64),
}

/// `amount` bond base units times a per-bond value, floored to base units.
pub fn scale(amount: u64, per_bond: u64) -> u128 {
    u128::from(amount) * u128::from(per_bond) / u128::from(UNIT)
}

/// Coupon paid per bond at `rating`: ten percent more, compounded, for every
/// star below five. An unrated round (0) pays the five-star coupon.
pub fn effective_coupon(coupon_base: u64, rating: u8) -> Result<u64, RatingError> {
    let steps = match rating {
        0 => 0,
        1..=5 => u32::from(5 - rating),
        _ => return Err(RatingError::OutOfRange(u64::from(rating))),
    };
    let value = u128::from(coupon_base) * 11u128.pow(steps) / 10u128.pow(steps);
    u64::try_from(value).map_err(|_| RatingError::Overflow(coupon_base))
}

/// Formats stablecoin base units as dollars, rounding half up to cents.
pub fn display_usd(units: u64) -> String {
    let cents = (u128::from(units) + 5_000) / 10_000;
    format!("${}.{:02}", cents / 100, cents % 100)
}

/// Number of coupon rounds that have come due at `now`.
pub fn coupon_round_at(params: &BondParams, now: Timestamp) -> u64 {
    match params.coupon_period() {
        Some(period) if now >= params.end_buy && period > 0 => {
            ((now - params.end_buy) / period).min(params.coupon_rounds)
        }
        _ => 0,
    }
}
