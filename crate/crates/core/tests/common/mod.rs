#![allow(dead_code)]

use greenbond::greenbond::{
    create_stablecoin, issue, labels, transfer_asset, BondDeployment, BondParams, UNIT,
};
use greenbond::ledger::{Address, AssetId, Ledger, MicroAlgos, Timestamp};

pub const ALGOS: u64 = 1_000_000;
pub const DOLLARS: u64 = UNIT;

/// A ledger with a stablecoin, its dispenser and the bond's roles.
pub struct World {
    pub ledger: Ledger,
    pub dispenser: Address,
    pub stablecoin: AssetId,
    pub issuer: Address,
    pub verifier: Address,
    pub regulator: Address,
    pub operator: Address,
}

impl World {
    pub fn new() -> Self {
        let mut ledger = Ledger::new();
        let dispenser = ledger.create_account();
        ledger.fund_algos(&dispenser, MicroAlgos(100 * ALGOS)).unwrap();
        let stablecoin = create_stablecoin(&mut ledger, &dispenser).unwrap();
        let mut world = World {
            ledger,
            dispenser,
            stablecoin,
            issuer: dispenser,
            verifier: dispenser,
            regulator: dispenser,
            operator: dispenser,
        };
        world.issuer = world.account();
        world.verifier = world.account();
        world.regulator = world.account();
        world.operator = world.account();
        world.opt_in_stablecoin(&world.issuer.clone());
        world
    }

    /// A fresh account holding 10 Algos.
    pub fn account(&mut self) -> Address {
        let a = self.ledger.create_account();
        self.ledger.fund_algos(&a, MicroAlgos(10 * ALGOS)).unwrap();
        a
    }

    pub fn opt_in_stablecoin(&mut self, who: &Address) {
        transfer_asset(&mut self.ledger, self.stablecoin, who, who, 0, labels::OPT_INTO_STABLECOIN).unwrap();
    }

    pub fn give_stablecoin(&mut self, to: &Address, amount: u64) {
        let (d, s) = (self.dispenser, self.stablecoin);
        transfer_asset(&mut self.ledger, s, &d, to, amount, "dispense").unwrap();
    }

    pub fn stablecoin_balance(&self, who: &Address) -> u64 {
        self.ledger.asset_balance(who, self.stablecoin)
    }

    /// Bond terms with round-number dates: buying in [100, 200), maturity
    /// at 200 + rounds * 100.
    pub fn params(&self, total_bonds: u64, coupon_rounds: u64, coupon: u64, principal: u64) -> BondParams {
        BondParams {
            total_bonds,
            coupon_rounds,
            start_buy: 100,
            end_buy: 200,
            maturity: 200 + coupon_rounds.max(1) * 100,
            bond_cost: 100 * DOLLARS,
            coupon_base: coupon,
            principal,
            issuer: self.issuer,
            green_verifier: self.verifier,
            financial_regulator: self.regulator,
            stablecoin_id: self.stablecoin,
        }
    }

    pub fn issue(&mut self, params: BondParams) -> BondDeployment {
        let op = self.operator;
        issue(&mut self.ledger, params, &op).unwrap()
    }

    /// Issues and has the regulator open the bond.
    pub fn issue_open(&mut self, params: BondParams) -> BondDeployment {
        let d = self.issue(params);
        d.freeze_all(&mut self.ledger, &self.regulator.clone(), 1).unwrap();
        d
    }

    /// A funded, approved investor opted into everything the bond needs.
    pub fn investor(&mut self, d: &BondDeployment, stablecoin: u64) -> Address {
        let inv = self.account();
        self.opt_in_stablecoin(&inv);
        if stablecoin > 0 {
            self.give_stablecoin(&inv, stablecoin);
        }
        d.opt_in_bond(&mut self.ledger, &inv).unwrap();
        d.opt_in_app(&mut self.ledger, &inv).unwrap();
        d.freeze_account(&mut self.ledger, &self.regulator.clone(), &inv, 1).unwrap();
        inv
    }

    pub fn advance(&mut self, to: Timestamp) {
        self.ledger.advance_time(to).unwrap();
    }

    /// Issuer tops up the stablecoin escrow.
    pub fn fund_escrow(&mut self, d: &BondDeployment, amount: u64) {
        let issuer = self.issuer;
        self.give_stablecoin(&issuer, amount);
        d.fund_escrow(&mut self.ledger, &issuer, amount).unwrap();
    }
}
