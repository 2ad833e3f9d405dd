use crate::ledger::{btoi, Address, AppId, AssetId, OnComplete, Timestamp};
use crate::programs::{ensure, CallContext, Deny, StateSchema, StatefulProgram, TealValue};

use super::keys::{COUPONS_PAID, RESERVE};
use super::main_app::{circulation, round_coupon};
use super::{actions, coupon_round_at, legs, links, rating_key, scale, write_packed, BondParams};

/// The bond's ratings and solvency application.
#[derive(Debug, Clone)]
pub struct ManageApp {
    params: BondParams,
}

impl ManageApp {
    pub fn new(params: BondParams) -> Self {
        Self { params }
    }

    /// Rating slot the verifier fills at `now`: the use-of-proceeds slot
    /// before the sale opens, then the coupon round in progress.
    pub fn rating_slot(params: &BondParams, now: Timestamp) -> Option<u64> {
        if now < params.start_buy {
            Some(0)
        } else if now >= params.end_buy && now < params.maturity && params.coupon_rounds > 0 {
            Some((coupon_round_at(params, now) + 1).min(params.coupon_rounds))
        } else {
            None
        }
    }
}

struct Linked {
    main_app: AppId,
    bond_id: AssetId,
    bond_escrow: Address,
    stablecoin_escrow: Address,
}

fn linked(ctx: &CallContext<'_>) -> Result<Linked, Deny> {
    Ok(Linked {
        main_app: ctx.config_app(links::MAIN_APP)?,
        bond_id: ctx.config_asset(links::BOND_ID)?,
        bond_escrow: ctx.config_address(links::BOND_ESCROW)?,
        stablecoin_escrow: ctx.config_address(links::STABLECOIN_ESCROW)?,
    })
}

/// Funds the stablecoin escrow holds and the reserve recorded by `Main`.
struct Funds {
    escrow: u128,
    reserve: u128,
    circulation: u64,
}

impl ManageApp {
    fn funds(&self, ctx: &CallContext<'_>, l: &Linked) -> Result<Funds, Deny> {
        let escrow = ctx
            .asset_balance(&l.stablecoin_escrow, self.params.stablecoin_id)?
            .ok_or_else(|| Deny::new("stablecoin escrow not opted in"))?;
        Ok(Funds {
            escrow: u128::from(escrow),
            reserve: u128::from(ctx.foreign_global_uint(l.main_app, RESERVE)?),
            circulation: circulation(ctx, l.bond_id, &l.bond_escrow)?,
        })
    }

    /// The next obligation of the bond if it has come due: the first coupon
    /// round nobody has claimed yet, or the principal once every round has
    /// started. `None` when nothing further is owed yet.
    fn next_obligation(&self, ctx: &CallContext<'_>, l: &Linked, funds: &Funds) -> Result<Option<u128>, Deny> {
        let p = &self.params;
        let started = ctx.foreign_global_uint(l.main_app, COUPONS_PAID)?;
        if started < p.coupon_rounds {
            let round = started + 1;
            if coupon_round_at(p, ctx.now()) < round {
                return Ok(None);
            }
            let per_bond = round_coupon(ctx, p, ctx.app_id(), round)?;
            Ok(Some(scale(funds.circulation, per_bond)))
        } else if ctx.now() >= p.maturity {
            Ok(Some(scale(funds.circulation, p.principal)))
        } else {
            Ok(None)
        }
    }

    fn rate(&self, ctx: &mut CallContext<'_>) -> Result<(), Deny> {
        legs::expect_len(ctx.group(), 1, "rate")?;
        ensure(ctx.sender() == self.params.green_verifier, || {
            "only the green verifier may rate".into()
        })?;
        let rating = ctx
            .arg(1)
            .and_then(btoi)
            .ok_or_else(|| Deny::new("rating must be an integer"))?;
        ensure((1..=5).contains(&rating), || format!("rating {rating} outside 1..=5"))?;
        let slot = Self::rating_slot(&self.params, ctx.now())
            .ok_or_else(|| Deny::new(format!("no rating period open at {}", ctx.now())))?;
        let key = rating_key(slot);
        let current = ctx.global_get(&key);
        let packed = write_packed(current.as_ref().and_then(TealValue::as_bytes), slot, rating as u8);
        ctx.global_put(&key, TealValue::Bytes(packed));
        Ok(())
    }

    fn not_defaulted(&self, ctx: &mut CallContext<'_>) -> Result<(), Deny> {
        let l = linked(ctx)?;
        let group = ctx.group();
        ensure(ctx.index() == 1, || "not_defaulted must follow the Main call".into())?;
        let funds = self.funds(ctx, &l)?;
        let required = match legs::action_of(group, 0, l.main_app) {
            Some(a) if a == actions::COUPON.as_bytes() => {
                // Main has already taken this claim out of the reserve.
                let payout = legs::asset_transfer(
                    group,
                    3,
                    self.params.stablecoin_id,
                    l.stablecoin_escrow,
                    None,
                    group[0].sender,
                )?;
                funds.reserve + u128::from(payout)
            }
            Some(a) if a == actions::SELL.as_bytes() => {
                funds.reserve + scale(funds.circulation, self.params.principal)
            }
            _ => return Err(Deny::new("not_defaulted must accompany a coupon or sell call")),
        };
        ensure(funds.escrow >= required, || {
            format!("stablecoin escrow holds {}, obligations require {required}", funds.escrow)
        })
    }

    fn defaulted(&self, ctx: &mut CallContext<'_>) -> Result<(), Deny> {
        let l = linked(ctx)?;
        let funds = self.funds(ctx, &l)?;
        match self.next_obligation(ctx, &l, &funds)? {
            Some(due) if funds.escrow < funds.reserve + due => Ok(()),
            _ => Err(Deny::new("bond is not in default")),
        }
    }

    fn claim_default(&self, ctx: &mut CallContext<'_>) -> Result<(), Deny> {
        let l = linked(ctx)?;
        let group = ctx.group();
        ensure(ctx.index() == 1, || "claim_default must follow the Main call".into())?;
        legs::app_call(group, 0, l.main_app, actions::DEFAULT)?;
        let investor = group[0].sender;
        let funds = self.funds(ctx, &l)?;
        let due = self
            .next_obligation(ctx, &l, &funds)?
            .ok_or_else(|| Deny::new("no obligation has come due"))?;
        ensure(funds.escrow < funds.reserve + due, || {
            format!(
                "bond is not in default: escrow {} covers reserve {} plus {due} due",
                funds.escrow, funds.reserve
            )
        })?;
        let held = ctx.asset_balance(&investor, l.bond_id)?.unwrap_or(0);
        let surplus = funds.escrow.saturating_sub(funds.reserve);
        let owed = surplus * u128::from(held) / u128::from(funds.circulation.max(1));
        let paid = legs::asset_transfer(group, 3, self.params.stablecoin_id, l.stablecoin_escrow, None, investor)?;
        ensure(u128::from(paid) == owed, || format!("default payout must be {owed}, got {paid}"))
    }
}

impl StatefulProgram for ManageApp {
    fn name(&self) -> &str {
        "Manage App"
    }

    fn schema(&self) -> StateSchema {
        StateSchema {
            global_uints: 0,
            global_bytes: self.params.rating_slots(),
            local_uints: 0,
            local_bytes: 0,
        }
    }

    fn approve(&self, ctx: &mut CallContext<'_>) -> Result<(), Deny> {
        if ctx.on_complete() != OnComplete::NoOp {
            return Err(Deny::new(format!("{} not permitted", ctx.on_complete().as_str())));
        }
        match std::str::from_utf8(ctx.arg(0).unwrap_or_default()).unwrap_or("") {
            actions::RATE => self.rate(ctx),
            actions::NOT_DEFAULTED => self.not_defaulted(ctx),
            actions::DEFAULTED => self.defaulted(ctx),
            actions::CLAIM_DEFAULT => self.claim_default(ctx),
            other => Err(Deny::new(format!("unknown action {other:?}"))),
        }
    }
}
