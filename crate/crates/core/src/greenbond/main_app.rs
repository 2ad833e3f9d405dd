use crate::ledger::{btoi, Address, AppId, AssetId, OnComplete};
use crate::programs::{ensure, CallContext, Deny, StateSchema, StatefulProgram};

use super::keys::{COUPONS_PAID, FROZEN, RESERVE, TRADE};
use super::{actions, coupon_round_at, effective_coupon, legs, links, rating_key, read_packed, scale, BondParams};

/// The bond's bookkeeping application.
#[derive(Debug, Clone)]
pub struct MainApp {
    params: BondParams,
}

impl MainApp {
    pub fn new(params: BondParams) -> Self {
        Self { params }
    }
}

/// Links resolved from the application configuration.
struct Linked {
    bond_id: AssetId,
    bond_escrow: Address,
    stablecoin_escrow: Address,
    manage_app: AppId,
}

fn linked(ctx: &CallContext<'_>) -> Result<Linked, Deny> {
    Ok(Linked {
        bond_id: ctx.config_asset(links::BOND_ID)?,
        bond_escrow: ctx.config_address(links::BOND_ESCROW)?,
        stablecoin_escrow: ctx.config_address(links::STABLECOIN_ESCROW)?,
        manage_app: ctx.config_app(links::MANAGE_APP)?,
    })
}

fn uint_arg(ctx: &CallContext<'_>, i: usize) -> Result<u64, Deny> {
    ctx.arg(i)
        .and_then(btoi)
        .ok_or_else(|| Deny::new(format!("argument {i} must be an integer")))
}

/// Bonds held by `account`, zero if it is not opted into the bond.
fn holding(ctx: &CallContext<'_>, account: &Address, bond_id: AssetId) -> Result<u64, Deny> {
    Ok(ctx.asset_balance(account, bond_id)?.unwrap_or(0))
}

/// Bonds outside the bond escrow.
pub(crate) fn circulation(ctx: &CallContext<'_>, bond_id: AssetId, bond_escrow: &Address) -> Result<u64, Deny> {
    let total = ctx.asset_total(bond_id).ok_or_else(|| Deny::new("bond asset missing"))?;
    let unsold = ctx.asset_balance(bond_escrow, bond_id)?.unwrap_or(0);
    Ok(total - unsold)
}

/// Coupon per bond for `round`, read from the ratings application.
pub(crate) fn round_coupon(
    ctx: &CallContext<'_>,
    params: &BondParams,
    manage_app: AppId,
    round: u64,
) -> Result<u64, Deny> {
    let packed = ctx.foreign_global(manage_app, &rating_key(round))?;
    let rating = read_packed(packed.as_ref().and_then(|v| v.as_bytes()), round);
    effective_coupon(params.coupon_base, rating).map_err(|e| Deny::new(e.to_string()))
}

fn require_unfrozen(ctx: &CallContext<'_>, account: &Address) -> Result<(), Deny> {
    ensure(ctx.global_uint(FROZEN) != 0, || "bond is frozen by the regulator".into())?;
    ensure(ctx.local_uint(account, FROZEN)? != 0, || {
        format!("account {} is frozen", account.short())
    })
}

impl MainApp {
    fn freeze_all(&self, ctx: &mut CallContext<'_>) -> Result<(), Deny> {
        legs::expect_len(ctx.group(), 1, "freeze_all")?;
        ensure(ctx.sender() == self.params.financial_regulator, || {
            "only the financial regulator may freeze".into()
        })?;
        let value = uint_arg(ctx, 1)?;
        ctx.global_put(FROZEN, value);
        Ok(())
    }

    fn freeze(&self, ctx: &mut CallContext<'_>) -> Result<(), Deny> {
        legs::expect_len(ctx.group(), 1, "freeze")?;
        ensure(ctx.sender() == self.params.financial_regulator, || {
            "only the financial regulator may freeze".into()
        })?;
        let target = *ctx.accounts().first().ok_or_else(|| Deny::new("freeze needs a target account"))?;
        let value = uint_arg(ctx, 1)?;
        ctx.local_put(&target, FROZEN, value)
    }

    fn set_trade(&self, ctx: &mut CallContext<'_>) -> Result<(), Deny> {
        legs::expect_len(ctx.group(), 1, "set_trade")?;
        let seller = ctx.sender();
        require_unfrozen(ctx, &seller)?;
        let allowance = uint_arg(ctx, 1)?;
        ctx.local_put(&seller, TRADE, allowance)
    }

    fn buy(&self, ctx: &mut CallContext<'_>) -> Result<(), Deny> {
        let l = linked(ctx)?;
        let p = &self.params;
        let group = ctx.group();
        legs::expect_len(group, 4, "buy")?;
        ensure(ctx.index() == 0, || "buy call must come first".into())?;
        let now = ctx.now();
        ensure(p.start_buy <= now && now < p.end_buy, || {
            format!("buying is open from {} until {}, now {now}", p.start_buy, p.end_buy)
        })?;
        let investor = ctx.sender();
        require_unfrozen(ctx, &investor)?;
        let fee_paid = legs::payment(group, 1, investor, l.bond_escrow)?;
        let n = legs::asset_transfer(group, 2, l.bond_id, l.bond_escrow, Some(l.bond_escrow), investor)?;
        ensure(fee_paid >= group[2].fee.0, || "escrow fee not reimbursed".into())?;
        ensure(n > 0, || "must buy a positive amount".into())?;
        let paid = legs::asset_transfer(group, 3, p.stablecoin_id, investor, None, p.issuer)?;
        let cost = scale(n, p.bond_cost);
        ensure(u128::from(paid) == cost, || format!("payment must be {cost}, got {paid}"))
    }

    fn trade(&self, ctx: &mut CallContext<'_>) -> Result<(), Deny> {
        let l = linked(ctx)?;
        let p = &self.params;
        let group = ctx.group();
        legs::expect_len(group, 4, "trade")?;
        ensure(ctx.index() == 0, || "trade call must come first".into())?;
        ensure(ctx.now() < p.maturity, || "bond has matured".into())?;
        let seller = ctx.sender();
        let buyer = *ctx.accounts().first().ok_or_else(|| Deny::new("trade needs the buyer account"))?;
        ensure(buyer != seller, || "cannot trade with yourself".into())?;
        require_unfrozen(ctx, &seller)?;
        require_unfrozen(ctx, &buyer)?;
        let fee_paid = legs::payment(group, 1, seller, l.bond_escrow)?;
        let n = legs::asset_transfer(group, 2, l.bond_id, l.bond_escrow, Some(seller), buyer)?;
        ensure(fee_paid >= group[2].fee.0, || "escrow fee not reimbursed".into())?;
        ensure(n > 0, || "must trade a positive amount".into())?;
        legs::asset_transfer(group, 3, p.stablecoin_id, buyer, None, seller)?;

        let allowance = ctx.local_uint(&seller, TRADE)?;
        ensure(allowance >= n, || format!("seller allows {allowance}, trade needs {n}"))?;
        ctx.local_put(&seller, TRADE, allowance - n)?;

        // A buyer who already holds bonds must be on the same coupon as the seller.
        let seller_paid = ctx.local_uint(&seller, COUPONS_PAID)?;
        if holding(ctx, &buyer, l.bond_id)? == 0 {
            ctx.local_put(&buyer, COUPONS_PAID, seller_paid)?;
        } else {
            let buyer_paid = ctx.local_uint(&buyer, COUPONS_PAID)?;
            ensure(buyer_paid == seller_paid, || {
                format!("buyer has claimed {buyer_paid} coupons, seller {seller_paid}")
            })?;
        }
        Ok(())
    }

    fn coupon(&self, ctx: &mut CallContext<'_>) -> Result<(), Deny> {
        let l = linked(ctx)?;
        let p = &self.params;
        let group = ctx.group();
        legs::expect_len(group, 4, "coupon")?;
        ensure(ctx.index() == 0, || "coupon call must come first".into())?;
        let investor = ctx.sender();
        require_unfrozen(ctx, &investor)?;
        legs::app_call(group, 1, l.manage_app, actions::NOT_DEFAULTED)?;
        let fee_paid = legs::payment(group, 2, investor, l.stablecoin_escrow)?;
        let paid = legs::asset_transfer(group, 3, p.stablecoin_id, l.stablecoin_escrow, None, investor)?;
        ensure(fee_paid >= group[3].fee.0, || "escrow fee not reimbursed".into())?;

        let held = holding(ctx, &investor, l.bond_id)?;
        ensure(held > 0, || "investor holds no bonds".into())?;
        let round = ctx.local_uint(&investor, COUPONS_PAID)? + 1;
        let due = coupon_round_at(p, ctx.now());
        ensure(round <= due, || format!("coupon {round} not due; {due} due so far"))?;
        let per_bond = round_coupon(ctx, p, l.manage_app, round)?;
        let owed = scale(held, per_bond);
        ensure(u128::from(paid) == owed, || format!("coupon payment must be {owed}, got {paid}"))?;

        let mut reserve = u128::from(ctx.global_uint(RESERVE));
        if round > ctx.global_uint(COUPONS_PAID) {
            ctx.global_put(COUPONS_PAID, round);
            reserve += scale(circulation(ctx, l.bond_id, &l.bond_escrow)?, per_bond);
        }
        let reserve = reserve
            .checked_sub(owed)
            .ok_or_else(|| Deny::new("coupon exceeds the reserve"))?;
        ctx.global_put(RESERVE, u64::try_from(reserve).map_err(|_| Deny::new("reserve overflow"))?);
        ctx.local_put(&investor, COUPONS_PAID, round)
    }

    fn sell(&self, ctx: &mut CallContext<'_>) -> Result<(), Deny> {
        let l = linked(ctx)?;
        let p = &self.params;
        let group = ctx.group();
        legs::expect_len(group, 6, "sell")?;
        ensure(ctx.index() == 0, || "sell call must come first".into())?;
        ensure(ctx.now() >= p.maturity, || "bond has not matured".into())?;
        let investor = ctx.sender();
        require_unfrozen(ctx, &investor)?;
        let claimed = ctx.local_uint(&investor, COUPONS_PAID)?;
        ensure(claimed == p.coupon_rounds, || {
            format!("claim all {} coupons first ({claimed} claimed)", p.coupon_rounds)
        })?;
        legs::app_call(group, 1, l.manage_app, actions::NOT_DEFAULTED)?;
        let held = holding(ctx, &investor, l.bond_id)?;
        ensure(held > 0, || "investor holds no bonds".into())?;
        let surrendered = legs::asset_transfer(group, 2, l.bond_id, l.bond_escrow, Some(investor), l.bond_escrow)?;
        ensure(surrendered == held, || format!("must surrender all {held} bonds"))?;
        let paid = legs::asset_transfer(group, 3, p.stablecoin_id, l.stablecoin_escrow, None, investor)?;
        let owed = scale(held, p.principal);
        ensure(u128::from(paid) == owed, || format!("principal payment must be {owed}, got {paid}"))?;
        self.fee_legs(ctx, &l, investor)
    }

    fn default(&self, ctx: &mut CallContext<'_>) -> Result<(), Deny> {
        let l = linked(ctx)?;
        let group = ctx.group();
        legs::expect_len(group, 6, "default")?;
        ensure(ctx.index() == 0, || "default call must come first".into())?;
        let investor = ctx.sender();
        require_unfrozen(ctx, &investor)?;
        let claimed = ctx.local_uint(&investor, COUPONS_PAID)?;
        let global = ctx.global_uint(COUPONS_PAID);
        ensure(claimed == global, || {
            format!("claim outstanding coupons first ({claimed} of {global} claimed)")
        })?;
        legs::app_call(group, 1, l.manage_app, actions::CLAIM_DEFAULT)?;
        let held = holding(ctx, &investor, l.bond_id)?;
        ensure(held > 0, || "investor holds no bonds".into())?;
        let surrendered = legs::asset_transfer(group, 2, l.bond_id, l.bond_escrow, Some(investor), l.bond_escrow)?;
        ensure(surrendered == held, || format!("must surrender all {held} bonds"))?;
        legs::asset_transfer(group, 3, self.params.stablecoin_id, l.stablecoin_escrow, None, investor)?;
        self.fee_legs(ctx, &l, investor)
    }

    /// Transactions 4 and 5 reimburse the fees of the two escrow transfers.
    fn fee_legs(&self, ctx: &CallContext<'_>, l: &Linked, investor: Address) -> Result<(), Deny> {
        let group = ctx.group();
        let bond_fee = legs::payment(group, 4, investor, l.bond_escrow)?;
        let stable_fee = legs::payment(group, 5, investor, l.stablecoin_escrow)?;
        ensure(bond_fee >= group[2].fee.0 && stable_fee >= group[3].fee.0, || {
            "escrow fees not reimbursed".into()
        })
    }

    fn opt_in(&self, ctx: &mut CallContext<'_>) -> Result<(), Deny> {
        let investor = ctx.sender();
        // Opting in again after clearing state must not reset coupon history.
        let bond_id = ctx.config_asset(links::BOND_ID)?;
        ensure(holding(ctx, &investor, bond_id)? == 0, || {
            "cannot opt in while holding bonds".into()
        })?;
        for key in [COUPONS_PAID, TRADE, FROZEN] {
            ctx.local_put(&investor, key, 0)?;
        }
        Ok(())
    }
}

impl StatefulProgram for MainApp {
    fn name(&self) -> &str {
        "Main App"
    }

    fn schema(&self) -> StateSchema {
        StateSchema { global_uints: 3, global_bytes: 0, local_uints: 3, local_bytes: 0 }
    }

    fn approve(&self, ctx: &mut CallContext<'_>) -> Result<(), Deny> {
        match ctx.on_complete() {
            OnComplete::OptIn => self.opt_in(ctx),
            OnComplete::CloseOut => {
                let bond_id = ctx.config_asset(links::BOND_ID)?;
                let investor = ctx.sender();
                ensure(holding(ctx, &investor, bond_id)? == 0, || {
                    "cannot close out while holding bonds".into()
                })
            }
            OnComplete::NoOp => {
                let action = ctx.arg(0).unwrap_or_default().to_vec();
                match std::str::from_utf8(&action).unwrap_or("") {
                    actions::FREEZE_ALL => self.freeze_all(ctx),
                    actions::FREEZE => self.freeze(ctx),
                    actions::SET_TRADE => self.set_trade(ctx),
                    actions::BUY => self.buy(ctx),
                    actions::TRADE => self.trade(ctx),
                    actions::COUPON => self.coupon(ctx),
                    actions::SELL => self.sell(ctx),
                    actions::DEFAULT => self.default(ctx),
                    other => Err(Deny::new(format!("unknown action {other:?}"))),
                }
            }
            other => Err(Deny::new(format!("{} not permitted", other.as_str()))),
        }
    }
}
