use std::sync::Arc;

use crate::ledger::{
    itob, Address, AppId, AppUpdate, AssetId, AssetParams, ConfigValue, CostLabels, Ledger, MicroAlgos,
    OnComplete, Rejection, SignatureKind, Timestamp, Transaction, TransactionGroup,
};
use crate::programs::{contract_account_address, LogicSig, StatelessProgram};

use super::keys::{COUPONS_PAID, RESERVE, TRADE};
use super::{
    actions, effective_coupon, links, rating_key, read_packed, scale, BondEscrow, BondParams, GreenBondError,
    MainApp, ManageApp, StablecoinEscrow, TradeOfferProgram,
};

/// Cost-ledger labels used by the protocol.
pub mod labels {
    pub const CREATE_ASA: &str = "Create new ASA";
    pub const FUND_CONTRACTS: &str = "Fund contract accounts";
    pub const FUND_STABLECOIN_ESCROW: &str = "Fund stablecoin escrow";
    pub const SEND_AND_CONFIGURE: &str = "Send green bond to escrow and configure";
    pub const DEPLOY_MAIN: &str = "Deploy Main App";
    pub const DEPLOY_MANAGE: &str = "Deploy Manage App";
    pub const UPDATE_APPS: &str = "Update Apps";
    pub const UPLOAD_REPORT: &str = "Upload Report";
    pub const OPT_INTO_ASA: &str = "Opt into ASA";
    pub const OPT_INTO_APP: &str = "Opt into App";
    pub const OPT_INTO_STABLECOIN: &str = "Opt into stablecoin";
    pub const BUY: &str = "Buy";
    pub const TRADE_SELL: &str = "Trade Sell";
    pub const TRADE_BUY: &str = "Trade Buy";
    pub const CLAIM_COUPON: &str = "Claim Coupon";
    pub const CLAIM_PRINCIPAL: &str = "Claim Principal";
    pub const CLAIM_DEFAULT: &str = "Claim Default";
    pub const RATE: &str = "Rate";
    pub const FREEZE: &str = "Freeze";
    pub const FUND_ESCROW: &str = "Fund escrow";

    /// Labels of the issuance and investor cost tables.
    pub const PROTOCOL: &[&str] = &[
        CREATE_ASA,
        FUND_CONTRACTS,
        SEND_AND_CONFIGURE,
        DEPLOY_MAIN,
        DEPLOY_MANAGE,
        UPDATE_APPS,
        UPLOAD_REPORT,
        OPT_INTO_ASA,
        OPT_INTO_APP,
        BUY,
        TRADE_SELL,
        TRADE_BUY,
        CLAIM_COUPON,
        CLAIM_PRINCIPAL,
        CLAIM_DEFAULT,
        RATE,
        FREEZE,
    ];
}

/// microAlgos sent to the bond escrow at issuance.
pub const BOND_ESCROW_FUNDING: u64 = 202_000;
/// microAlgos sent to the stablecoin escrow at issuance.
pub const STABLECOIN_ESCROW_FUNDING: u64 = 201_000;

/// Everything created when a bond is issued.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BondDeployment {
    pub params: BondParams,
    pub operator: Address,
    pub bond_id: AssetId,
    pub main_app: AppId,
    pub manage_app: AppId,
    pub bond_escrow: Address,
    pub stablecoin_escrow: Address,
}

/// A signed offer to sell bonds at a fixed price until `expiry`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TradeOffer {
    pub terms: TradeOfferProgram,
    pub lsig: LogicSig,
}

impl TradeOffer {
    pub fn seller(&self) -> Address {
        self.terms.seller
    }
}

/// Mints the bond, deploys and links both applications and both escrows,
/// and parks the full supply in the bond escrow. `operator` pays for all of
/// it; the bond starts frozen until the regulator approves it.
pub fn issue(ledger: &mut Ledger, params: BondParams, operator: &Address) -> Result<BondDeployment, GreenBondError> {
    params.validate()?;
    if ledger.asset(params.stablecoin_id).is_none() {
        return Err(GreenBondError::InvalidParams(format!(
            "stablecoin asset {} does not exist",
            params.stablecoin_id
        )));
    }

    let bond_id = ledger.create_asset(
        operator,
        AssetParams {
            total: params.supply(),
            decimals: 6,
            default_frozen: true,
            manager: Some(*operator),
            freeze: None,
            clawback: None,
        },
    )?;
    let main_app = ledger.register_stateful(Arc::new(MainApp::new(params.clone())), operator)?;
    let manage_app = ledger.register_stateful(Arc::new(ManageApp::new(params.clone())), operator)?;

    let d = BondDeployment {
        bond_escrow: contract_account_address(&bond_escrow_program(main_app, bond_id)),
        stablecoin_escrow: contract_account_address(&stablecoin_escrow_program(
            main_app,
            manage_app,
            params.stablecoin_id,
        )),
        params,
        operator: *operator,
        bond_id,
        main_app,
        manage_app,
    };

    let now = ledger.now();
    let submit = |ledger: &mut Ledger, txns: Vec<Transaction>, label: &str| -> Result<(), GreenBondError> {
        let group = TransactionGroup::new(txns).expect("issuance groups are small");
        ledger.submit_group_as(&group, &CostLabels::new(label))?;
        Ok(())
    };

    submit(
        ledger,
        vec![Transaction::payment(*operator, d.bond_escrow, MicroAlgos(BOND_ESCROW_FUNDING), now)],
        labels::FUND_CONTRACTS,
    )?;
    submit(
        ledger,
        vec![Transaction::asset_opt_in(d.bond_escrow, bond_id, now).with_signature(d.bond_escrow_sig())],
        labels::OPT_INTO_ASA,
    )?;
    submit(
        ledger,
        vec![Transaction::payment(*operator, d.stablecoin_escrow, MicroAlgos(STABLECOIN_ESCROW_FUNDING), now)],
        labels::FUND_STABLECOIN_ESCROW,
    )?;
    submit(
        ledger,
        vec![Transaction::asset_opt_in(d.stablecoin_escrow, d.params.stablecoin_id, now)
            .with_signature(d.stablecoin_escrow_sig())],
        labels::OPT_INTO_STABLECOIN,
    )?;
    submit(
        ledger,
        vec![
            Transaction::asset_transfer(*operator, bond_id, d.bond_escrow, d.params.supply(), now),
            Transaction::new(
                *operator,
                crate::ledger::TxnKind::AssetConfig { asset_id: bond_id, clawback: Some(d.bond_escrow), freeze: None },
                now,
            ),
        ],
        labels::SEND_AND_CONFIGURE,
    )?;

    let main_links = vec![
        (links::BOND_ESCROW.to_owned(), ConfigValue::Address(d.bond_escrow)),
        (links::STABLECOIN_ESCROW.to_owned(), ConfigValue::Address(d.stablecoin_escrow)),
        (links::MANAGE_APP.to_owned(), ConfigValue::App(manage_app)),
        (links::BOND_ID.to_owned(), ConfigValue::Asset(bond_id)),
    ];
    let manage_links = vec![
        (links::BOND_ESCROW.to_owned(), ConfigValue::Address(d.bond_escrow)),
        (links::STABLECOIN_ESCROW.to_owned(), ConfigValue::Address(d.stablecoin_escrow)),
        (links::MAIN_APP.to_owned(), ConfigValue::App(main_app)),
        (links::BOND_ID.to_owned(), ConfigValue::Asset(bond_id)),
    ];
    submit(
        ledger,
        vec![
            crate::ledger::update_application(*operator, main_app, AppUpdate { links: main_links, finalize: true }, now),
            crate::ledger::update_application(
                *operator,
                manage_app,
                AppUpdate { links: manage_links, finalize: true },
                now,
            ),
        ],
        labels::UPDATE_APPS,
    )?;
    Ok(d)
}

fn bond_escrow_program(main_app: AppId, bond_id: AssetId) -> StatelessProgram {
    StatelessProgram::new(BondEscrow { main_app, bond_id })
}

fn stablecoin_escrow_program(main_app: AppId, manage_app: AppId, stablecoin_id: AssetId) -> StatelessProgram {
    StatelessProgram::new(StablecoinEscrow { main_app, manage_app, stablecoin_id })
}

fn action(name: &str) -> Vec<u8> {
    name.as_bytes().to_vec()
}

fn submit(ledger: &mut Ledger, group: TransactionGroup, labels: CostLabels) -> Result<(), Rejection> {
    ledger.submit_group_as(&group, &labels)
}

fn group(txns: Vec<Transaction>) -> TransactionGroup {
    TransactionGroup::new(txns).expect("protocol groups have at most 6 transactions")
}

impl BondDeployment {
    pub fn bond_escrow_sig(&self) -> SignatureKind {
        SignatureKind::LogicSig(LogicSig::contract(bond_escrow_program(self.main_app, self.bond_id)))
    }

    pub fn stablecoin_escrow_sig(&self) -> SignatureKind {
        SignatureKind::LogicSig(LogicSig::contract(stablecoin_escrow_program(
            self.main_app,
            self.manage_app,
            self.params.stablecoin_id,
        )))
    }

    fn main_call(&self, sender: Address, args: Vec<Vec<u8>>, now: Timestamp) -> Transaction {
        Transaction::app_call(sender, self.main_app, OnComplete::NoOp, args, now)
    }

    /// The `Manage` check that accompanies coupon and principal claims.
    fn manage_call(&self, sender: Address, name: &str, now: Timestamp) -> Transaction {
        Transaction::app_call(sender, self.manage_app, OnComplete::NoOp, vec![action(name)], now)
            .with_accounts([self.stablecoin_escrow, self.bond_escrow])
            .with_apps([self.main_app])
    }

    fn fee_payment(&self, sender: Address, escrow: Address, now: Timestamp) -> Transaction {
        Transaction::payment(sender, escrow, crate::ledger::MIN_FEE, now)
    }

    // ---- queries ----

    /// Bond base units held outside the bond escrow.
    pub fn circulation(&self, ledger: &Ledger) -> u64 {
        self.params.supply() - ledger.asset_balance(&self.bond_escrow, self.bond_id)
    }

    pub fn escrow_funds(&self, ledger: &Ledger) -> u64 {
        ledger.asset_balance(&self.stablecoin_escrow, self.params.stablecoin_id)
    }

    fn main_global(&self, ledger: &Ledger, key: &[u8]) -> u64 {
        ledger.global_value(self.main_app, key).and_then(|v| v.as_uint()).unwrap_or(0)
    }

    fn main_local(&self, ledger: &Ledger, who: &Address, key: &[u8]) -> u64 {
        ledger.local_value(who, self.main_app, key).and_then(|v| v.as_uint()).unwrap_or(0)
    }

    pub fn reserve(&self, ledger: &Ledger) -> u64 {
        self.main_global(ledger, RESERVE)
    }

    pub fn global_coupons_paid(&self, ledger: &Ledger) -> u64 {
        self.main_global(ledger, COUPONS_PAID)
    }

    pub fn coupons_paid(&self, ledger: &Ledger, investor: &Address) -> u64 {
        self.main_local(ledger, investor, COUPONS_PAID)
    }

    pub fn trade_allowance(&self, ledger: &Ledger, seller: &Address) -> u64 {
        self.main_local(ledger, seller, TRADE)
    }

    /// Rating stored in slot `index` (0 when unset).
    pub fn rating(&self, ledger: &Ledger, index: u64) -> Result<u8, GreenBondError> {
        if index > self.params.coupon_rounds {
            return Err(GreenBondError::RatingIndex { index, max: self.params.coupon_rounds });
        }
        let packed = ledger.global_value(self.manage_app, &rating_key(index));
        Ok(read_packed(packed.and_then(|v| v.as_bytes()), index))
    }

    /// Coupon per bond for `round` at its current rating.
    pub fn round_coupon(&self, ledger: &Ledger, round: u64) -> u64 {
        let rating = self.rating(ledger, round).unwrap_or(0);
        effective_coupon(self.params.coupon_base, rating).unwrap_or(u64::MAX)
    }

    // ---- group builders ----

    pub fn build_opt_in_app(&self, investor: Address, now: Timestamp) -> TransactionGroup {
        TransactionGroup::single(Transaction::app_call(investor, self.main_app, OnComplete::OptIn, Vec::new(), now))
    }

    pub fn build_freeze_all(&self, regulator: Address, value: u64, now: Timestamp) -> TransactionGroup {
        TransactionGroup::single(self.main_call(regulator, vec![action(actions::FREEZE_ALL), itob(value)], now))
    }

    pub fn build_freeze_account(&self, regulator: Address, target: Address, value: u64, now: Timestamp) -> TransactionGroup {
        TransactionGroup::single(
            self.main_call(regulator, vec![action(actions::FREEZE), itob(value)], now).with_accounts([target]),
        )
    }

    pub fn build_set_trade(&self, seller: Address, allowance: u64, now: Timestamp) -> TransactionGroup {
        TransactionGroup::single(self.main_call(seller, vec![action(actions::SET_TRADE), itob(allowance)], now))
    }

    pub fn build_rate(&self, verifier: Address, rating: u64, now: Timestamp) -> TransactionGroup {
        TransactionGroup::single(Transaction::app_call(
            verifier,
            self.manage_app,
            OnComplete::NoOp,
            vec![action(actions::RATE), itob(rating)],
            now,
        ))
    }

    /// Transfer of `amount` stablecoin from anyone into the stablecoin escrow.
    pub fn build_fund_escrow(&self, funder: Address, amount: u64, now: Timestamp) -> TransactionGroup {
        TransactionGroup::single(Transaction::asset_transfer(
            funder,
            self.params.stablecoin_id,
            self.stablecoin_escrow,
            amount,
            now,
        ))
    }

    /// Buy `n` bond base units from the escrow at the issue price.
    pub fn build_buy(&self, investor: Address, n: u64, now: Timestamp) -> TransactionGroup {
        let cost = saturate(scale(n, self.params.bond_cost));
        group(vec![
            self.main_call(investor, vec![action(actions::BUY)], now),
            self.fee_payment(investor, self.bond_escrow, now),
            Transaction::clawback(self.bond_escrow, self.bond_id, self.bond_escrow, investor, n, now)
                .with_signature(self.bond_escrow_sig()),
            Transaction::asset_transfer(investor, self.params.stablecoin_id, self.params.issuer, cost, now),
        ])
    }

    /// Off-ledger: the seller signs an offer at `price` per whole bond.
    pub fn make_trade_offer(&self, seller: Address, price: u64, expiry: Timestamp) -> TradeOffer {
        let terms = TradeOfferProgram {
            seller,
            price,
            expiry,
            main_app: self.main_app,
            bond_escrow: self.bond_escrow,
            bond_id: self.bond_id,
            stablecoin_id: self.params.stablecoin_id,
        };
        let lsig = LogicSig::delegated(StatelessProgram::new(terms.clone()), seller);
        TradeOffer { terms, lsig }
    }

    /// `buyer` takes `n` bond base units under `offer`.
    pub fn build_trade(&self, offer: &TradeOffer, buyer: Address, n: u64, now: Timestamp) -> TransactionGroup {
        let seller = offer.seller();
        let signed = SignatureKind::LogicSig(offer.lsig.clone());
        // Keep the transactions inside the offer's lifetime when possible.
        let last_valid = if offer.terms.expiry > now {
            (now + crate::ledger::DEFAULT_VALIDITY).min(offer.terms.expiry - 1)
        } else {
            now + crate::ledger::DEFAULT_VALIDITY
        };
        let price = saturate(scale(n, offer.terms.price));
        group(vec![
            self.main_call(seller, vec![action(actions::TRADE)], now)
                .with_accounts([buyer])
                .with_signature(signed.clone())
                .with_last_valid(last_valid),
            self.fee_payment(seller, self.bond_escrow, now)
                .with_signature(signed)
                .with_last_valid(last_valid),
            Transaction::clawback(self.bond_escrow, self.bond_id, seller, buyer, n, now)
                .with_signature(self.bond_escrow_sig()),
            Transaction::asset_transfer(buyer, self.params.stablecoin_id, seller, price, now),
        ])
    }

    /// Claim of the investor's next coupon, priced from current holdings and
    /// the round's rating.
    pub fn build_coupon(&self, ledger: &Ledger, investor: Address) -> TransactionGroup {
        let now = ledger.now();
        let held = ledger.asset_balance(&investor, self.bond_id);
        let round = self.coupons_paid(ledger, &investor) + 1;
        let payout = saturate(scale(held, self.round_coupon(ledger, round)));
        group(vec![
            self.main_call(investor, vec![action(actions::COUPON)], now)
                .with_accounts([self.bond_escrow])
                .with_apps([self.manage_app]),
            self.manage_call(investor, actions::NOT_DEFAULTED, now),
            self.fee_payment(investor, self.stablecoin_escrow, now),
            Transaction::asset_transfer(self.stablecoin_escrow, self.params.stablecoin_id, investor, payout, now)
                .with_signature(self.stablecoin_escrow_sig()),
        ])
    }

    /// Surrender of all holdings for the principal at maturity.
    pub fn build_principal(&self, ledger: &Ledger, investor: Address) -> TransactionGroup {
        let held = ledger.asset_balance(&investor, self.bond_id);
        let payout = saturate(scale(held, self.params.principal));
        self.build_surrender(ledger, investor, actions::SELL, actions::NOT_DEFAULTED, held, payout)
    }

    /// Surrender of all holdings for a share of the escrow above the reserve.
    pub fn build_default(&self, ledger: &Ledger, investor: Address) -> TransactionGroup {
        let held = ledger.asset_balance(&investor, self.bond_id);
        let payout = self.default_payout(ledger, held);
        self.build_surrender(ledger, investor, actions::DEFAULT, actions::CLAIM_DEFAULT, held, payout)
    }

    /// Pro-rata share of the escrow surplus for `held` bond base units.
    pub fn default_payout(&self, ledger: &Ledger, held: u64) -> u64 {
        let surplus = u128::from(self.escrow_funds(ledger).saturating_sub(self.reserve(ledger)));
        let circulation = u128::from(self.circulation(ledger).max(1));
        saturate(surplus * u128::from(held) / circulation)
    }

    fn build_surrender(
        &self,
        ledger: &Ledger,
        investor: Address,
        main_action: &str,
        manage_action: &str,
        held: u64,
        payout: u64,
    ) -> TransactionGroup {
        let now = ledger.now();
        group(vec![
            self.main_call(investor, vec![action(main_action)], now)
                .with_accounts([self.bond_escrow])
                .with_apps([self.manage_app]),
            self.manage_call(investor, manage_action, now),
            Transaction::clawback(self.bond_escrow, self.bond_id, investor, self.bond_escrow, held, now)
                .with_signature(self.bond_escrow_sig()),
            Transaction::asset_transfer(self.stablecoin_escrow, self.params.stablecoin_id, investor, payout, now)
                .with_signature(self.stablecoin_escrow_sig()),
            self.fee_payment(investor, self.bond_escrow, now),
            self.fee_payment(investor, self.stablecoin_escrow, now),
        ])
    }

    // ---- submitters ----

    pub fn opt_in_bond(&self, ledger: &mut Ledger, investor: &Address) -> Result<(), Rejection> {
        let txn = Transaction::asset_opt_in(*investor, self.bond_id, ledger.now());
        submit(ledger, TransactionGroup::single(txn), labels::OPT_INTO_ASA.into())
    }

    pub fn opt_in_app(&self, ledger: &mut Ledger, investor: &Address) -> Result<(), Rejection> {
        let g = self.build_opt_in_app(*investor, ledger.now());
        submit(ledger, g, labels::OPT_INTO_APP.into())
    }

    pub fn freeze_all(&self, ledger: &mut Ledger, regulator: &Address, value: u64) -> Result<(), Rejection> {
        let g = self.build_freeze_all(*regulator, value, ledger.now());
        submit(ledger, g, labels::FREEZE.into())
    }

    pub fn freeze_account(
        &self,
        ledger: &mut Ledger,
        regulator: &Address,
        target: &Address,
        value: u64,
    ) -> Result<(), Rejection> {
        let g = self.build_freeze_account(*regulator, *target, value, ledger.now());
        submit(ledger, g, labels::FREEZE.into())
    }

    pub fn set_trade(&self, ledger: &mut Ledger, seller: &Address, allowance: u64) -> Result<(), Rejection> {
        let g = self.build_set_trade(*seller, allowance, ledger.now());
        submit(ledger, g, labels::TRADE_SELL.into())
    }

    pub fn rate(&self, ledger: &mut Ledger, verifier: &Address, rating: u64) -> Result<(), Rejection> {
        let g = self.build_rate(*verifier, rating, ledger.now());
        submit(ledger, g, labels::RATE.into())
    }

    pub fn fund_escrow(&self, ledger: &mut Ledger, funder: &Address, amount: u64) -> Result<(), Rejection> {
        let g = self.build_fund_escrow(*funder, amount, ledger.now());
        submit(ledger, g, labels::FUND_ESCROW.into())
    }

    pub fn buy(&self, ledger: &mut Ledger, investor: &Address, n: u64) -> Result<(), Rejection> {
        let g = self.build_buy(*investor, n, ledger.now());
        submit(ledger, g, labels::BUY.into())
    }

    pub fn trade(&self, ledger: &mut Ledger, offer: &TradeOffer, buyer: &Address, n: u64) -> Result<(), Rejection> {
        let g = self.build_trade(offer, *buyer, n, ledger.now());
        let labels = CostLabels::new(labels::TRADE_BUY).with_sender(offer.seller(), labels::TRADE_SELL);
        submit(ledger, g, labels)
    }

    pub fn claim_coupon(&self, ledger: &mut Ledger, investor: &Address) -> Result<(), Rejection> {
        let g = self.build_coupon(ledger, *investor);
        submit(ledger, g, labels::CLAIM_COUPON.into())
    }

    pub fn claim_principal(&self, ledger: &mut Ledger, investor: &Address) -> Result<(), Rejection> {
        let g = self.build_principal(ledger, *investor);
        submit(ledger, g, labels::CLAIM_PRINCIPAL.into())
    }

    pub fn claim_default(&self, ledger: &mut Ledger, investor: &Address) -> Result<(), Rejection> {
        let g = self.build_default(ledger, *investor);
        submit(ledger, g, labels::CLAIM_DEFAULT.into())
    }
}

fn saturate(v: u128) -> u64 {
    u64::try_from(v).unwrap_or(u64::MAX)
}

