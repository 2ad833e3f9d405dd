//! Executes a parsed scenario against a fresh ledger.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::PathBuf;

use crate::greenbond::{
    create_stablecoin, issue, labels, transfer_asset, BondDeployment, BondParams, GreenBondError, TradeOffer,
};
use crate::ledger::{Address, AssetId, Ledger, LedgerError, MicroAlgos, Rejection};
use crate::programs::TealValue;
use crate::reports::{self, ContentId, ReportError, ReportStore};

use super::scenario::{Assertion, Comparison, FreezeTarget, IssueTerms, ReportSource, Scenario, ScenarioStep, Step};

/// Algos minted for the account that dispenses the scenario's stablecoin.
const DISPENSER_ALGOS: u64 = 1_000_000_000;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("step {step} (line {line}): {source}")]
    Ledger { step: usize, line: usize, source: LedgerError },
    #[error("step {step} (line {line}): {source}")]
    Report { step: usize, line: usize, source: ReportError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// How a step ended, as shown in the transcript.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Approved,
    Rejected { code: String, detail: String },
}

impl Outcome {
    fn rejected(code: &str, detail: impl fmt::Display) -> Self {
        Outcome::Rejected { code: code.to_owned(), detail: detail.to_string() }
    }
}

impl From<Result<(), Rejection>> for Outcome {
    fn from(r: Result<(), Rejection>) -> Self {
        match r {
            Ok(()) => Outcome::Approved,
            Err(rej) => Outcome::rejected(rej.reason.code(), rej.to_string()),
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Approved => f.write_str("APPROVED"),
            Outcome::Rejected { detail, .. } => write!(f, "REJECTED({detail})"),
        }
    }
}

/// Result of a completed run.
#[derive(Debug)]
pub struct RunReport {
    pub transcript: Vec<String>,
    /// False once an assertion failed; the run stops there.
    pub passed: bool,
}

#[derive(Clone, Debug)]
struct Dispenser {
    account: Address,
    stablecoin: AssetId,
}

/// Scenario state: the ledger plus every name bound so far.
#[derive(Clone, Debug)]
pub struct Runner {
    pub ledger: Ledger,
    accounts: Vec<(String, Address)>,
    bonds: Vec<(String, BondDeployment)>,
    offers: BTreeMap<String, TradeOffer>,
    reports: BTreeMap<String, ContentId>,
    store: ReportStore,
    dispenser: Option<Dispenser>,
    last: Option<Outcome>,
    deltas: bool,
}

impl Default for Runner {
    fn default() -> Self {
        Self::new()
    }
}

type Snapshot = Vec<(String, String)>;

impl Runner {
    pub fn new() -> Self {
        Self {
            ledger: Ledger::new(),
            accounts: Vec::new(),
            bonds: Vec::new(),
            offers: BTreeMap::new(),
            reports: BTreeMap::new(),
            store: ReportStore::new(),
            dispenser: None,
            last: None,
            deltas: false,
        }
    }

    /// Adds changed balances and application state after every step.
    pub fn with_deltas(mut self, on: bool) -> Self {
        self.deltas = on;
        self
    }

    /// Named accounts in creation order.
    pub fn accounts(&self) -> &[(String, Address)] {
        &self.accounts
    }

    pub fn bond(&self, name: &str) -> Option<&BondDeployment> {
        self.bonds.iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }

    pub fn stablecoin(&self) -> Option<AssetId> {
        self.dispenser.as_ref().map(|d| d.stablecoin)
    }

    pub fn account(&self, name: &str) -> Option<Address> {
        if let Some((bond, role)) = name.split_once(':') {
            let d = self.bond(bond)?;
            return match role {
                "bond-escrow" => Some(d.bond_escrow),
                "stablecoin-escrow" => Some(d.stablecoin_escrow),
                "operator" => Some(d.operator),
                _ => None,
            };
        }
        self.accounts.iter().find(|(n, _)| n == name).map(|(_, a)| *a)
    }

    // Names are checked by the parser, so lookups here cannot miss.
    fn addr(&self, name: &str) -> Address {
        self.account(name).unwrap_or_else(|| panic!("unbound account {name}"))
    }

    fn deployment(&self, name: &str) -> BondDeployment {
        self.bond(name).cloned().unwrap_or_else(|| panic!("unbound bond {name}"))
    }

    fn dispenser(&mut self) -> Result<Dispenser, LedgerError> {
        if let Some(d) = &self.dispenser {
            return Ok(d.clone());
        }
        let account = self.ledger.create_account();
        self.ledger.fund_algos(&account, MicroAlgos(DISPENSER_ALGOS))?;
        let stablecoin = create_stablecoin(&mut self.ledger, &account)?;
        let d = Dispenser { account, stablecoin };
        self.dispenser = Some(d.clone());
        Ok(d)
    }

    pub fn run(&mut self, scenario: &Scenario) -> Result<RunReport, RunError> {
        let mut transcript = Vec::new();
        for (i, s) in scenario.steps.iter().enumerate() {
            let n = i + 1;
            let before = self.deltas.then(|| self.snapshot());
            let outcome = self.execute(n, s)?;
            let failed_assert = matches!(s.step, Step::Assert(_)) && outcome != Outcome::Approved;
            transcript.push(format!("STEP {n} {} -> {outcome}", s.text));
            if let Some(before) = before {
                transcript.extend(diff(&before, &self.snapshot()));
            }
            if failed_assert {
                return Ok(RunReport { transcript, passed: false });
            }
            if s.step.submits() {
                self.last = Some(outcome);
            }
        }
        Ok(RunReport { transcript, passed: true })
    }

    fn execute(&mut self, n: usize, s: &ScenarioStep) -> Result<Outcome, RunError> {
        let ledger_err = |source| RunError::Ledger { step: n, line: s.line, source };
        let report_err = |source| RunError::Report { step: n, line: s.line, source };
        Ok(match &s.step {
            Step::CreateAccount { name } => {
                let a = self.ledger.create_account();
                self.accounts.push((name.clone(), a));
                Outcome::Approved
            }
            Step::FundAlgos { account, amount } => {
                let a = self.addr(account);
                self.ledger.fund_algos(&a, MicroAlgos(*amount)).map_err(ledger_err)?;
                Outcome::Approved
            }
            Step::FundStablecoin { account, amount } => {
                let d = self.dispenser().map_err(ledger_err)?;
                let to = self.addr(account);
                if self.ledger.holding(&to, d.stablecoin).is_none() {
                    let r = transfer_asset(&mut self.ledger, d.stablecoin, &to, &to, 0, labels::OPT_INTO_STABLECOIN);
                    if r.is_err() {
                        return Ok(r.into());
                    }
                }
                transfer_asset(&mut self.ledger, d.stablecoin, &d.account, &to, *amount, "Dispense stablecoin").into()
            }
            Step::Issue { bond, terms } => {
                let d = self.dispenser().map_err(ledger_err)?;
                let params = self.bond_params(terms, d.stablecoin);
                let operator = self.addr(&terms.operator);
                match issue(&mut self.ledger, params, &operator) {
                    Ok(dep) => {
                        self.bonds.push((bond.clone(), dep));
                        Outcome::Approved
                    }
                    Err(GreenBondError::Rejected(r)) => Err(r).into(),
                    Err(GreenBondError::Ledger(e)) => Outcome::rejected("ledger", e),
                    Err(e) => Outcome::rejected("invalid-params", e),
                }
            }
            Step::OptIn { account, bond } => {
                let (d, a) = (self.deployment(bond), self.addr(account));
                if self.ledger.holding(&a, d.bond_id).is_none() {
                    let r = d.opt_in_bond(&mut self.ledger, &a);
                    if r.is_err() {
                        return Ok(r.into());
                    }
                }
                d.opt_in_app(&mut self.ledger, &a).into()
            }
            Step::ApproveBond { regulator, bond } => {
                let (d, r) = (self.deployment(bond), self.addr(regulator));
                d.freeze_all(&mut self.ledger, &r, 1).into()
            }
            Step::ApproveAccount { regulator, bond, account } => {
                let (d, r, a) = (self.deployment(bond), self.addr(regulator), self.addr(account));
                d.freeze_account(&mut self.ledger, &r, &a, 1).into()
            }
            Step::Freeze { regulator, bond, target, value } => {
                let (d, r) = (self.deployment(bond), self.addr(regulator));
                match target {
                    FreezeTarget::All => d.freeze_all(&mut self.ledger, &r, *value).into(),
                    FreezeTarget::Account(name) => {
                        let a = self.addr(name);
                        d.freeze_account(&mut self.ledger, &r, &a, *value).into()
                    }
                }
            }
            Step::Buy { account, bond, amount } => {
                let (d, a) = (self.deployment(bond), self.addr(account));
                d.buy(&mut self.ledger, &a, *amount).into()
            }
            Step::SetTrade { account, bond, amount } => {
                let (d, a) = (self.deployment(bond), self.addr(account));
                d.set_trade(&mut self.ledger, &a, *amount).into()
            }
            Step::Offer { offer, seller, bond, price, expiry } => {
                let (d, a) = (self.deployment(bond), self.addr(seller));
                self.offers.insert(offer.clone(), d.make_trade_offer(a, *price, *expiry));
                Outcome::Approved
            }
            Step::Trade { buyer, offer, amount } => {
                let o = self.offers[offer].clone();
                let b = self.addr(buyer);
                let d = self
                    .bonds
                    .iter()
                    .map(|(_, d)| d)
                    .find(|d| d.main_app == o.terms.main_app)
                    .cloned()
                    .expect("offer refers to a bond of this scenario");
                d.trade(&mut self.ledger, &o, &b, *amount).into()
            }
            Step::FundEscrow { account, bond, amount } => {
                let (d, a) = (self.deployment(bond), self.addr(account));
                d.fund_escrow(&mut self.ledger, &a, *amount).into()
            }
            Step::Rate { account, bond, rating } => {
                let (d, a) = (self.deployment(bond), self.addr(account));
                d.rate(&mut self.ledger, &a, *rating).into()
            }
            Step::ClaimCoupon { account, bond } => {
                let (d, a) = (self.deployment(bond), self.addr(account));
                d.claim_coupon(&mut self.ledger, &a).into()
            }
            Step::ClaimPrincipal { account, bond } => {
                let (d, a) = (self.deployment(bond), self.addr(account));
                d.claim_principal(&mut self.ledger, &a).into()
            }
            Step::ClaimDefault { account, bond } => {
                let (d, a) = (self.deployment(bond), self.addr(account));
                d.claim_default(&mut self.ledger, &a).into()
            }
            Step::ReportPut { report, source } => {
                let bytes = match source {
                    ReportSource::Inline(text) => text.clone().into_bytes(),
                    ReportSource::File(path) => {
                        fs::read(path).map_err(|source| RunError::Io { path: path.clone(), source })?
                    }
                };
                let cid = self.store.store(&bytes);
                self.reports.insert(report.clone(), cid);
                Outcome::Approved
            }
            Step::ReportAnchor { account, bond, report } => {
                let (d, a) = (self.deployment(bond), self.addr(account));
                let cid = self.reports[report].clone();
                match reports::anchor(&mut self.ledger, &a, d.manage_app, &cid) {
                    Ok(()) => Outcome::Approved,
                    Err(ReportError::Rejected(r)) => Err(r).into(),
                    Err(e) => return Err(report_err(e)),
                }
            }
            Step::AdvanceTime { to } => {
                self.ledger.advance_time(*to).map_err(ledger_err)?;
                Outcome::Approved
            }
            Step::Assert(a) => self.check(a),
        })
    }

    fn bond_params(&self, t: &IssueTerms, stablecoin_id: AssetId) -> BondParams {
        BondParams {
            total_bonds: t.total_bonds,
            coupon_rounds: t.coupon_rounds,
            start_buy: t.start_buy,
            end_buy: t.end_buy,
            maturity: t.maturity,
            bond_cost: t.bond_cost,
            coupon_base: t.coupon,
            principal: t.principal,
            issuer: self.addr(&t.issuer),
            green_verifier: self.addr(&t.verifier),
            financial_regulator: self.addr(&t.regulator),
            stablecoin_id,
        }
    }

    fn stablecoin_balance(&self, a: &Address) -> u64 {
        self.stablecoin().map_or(0, |s| self.ledger.asset_balance(a, s))
    }

    /// Reads `key` of Main's global state, or of Manage's with a `manage.` prefix.
    fn global(&self, d: &BondDeployment, key: &str) -> Option<TealValue> {
        match key.strip_prefix("manage.") {
            Some(k) => self.ledger.global_value(d.manage_app, k.as_bytes()).cloned(),
            None => self.ledger.global_value(d.main_app, key.as_bytes()).cloned(),
        }
    }

    fn check(&self, assertion: &Assertion) -> Outcome {
        let compare = |what: String, actual: i128, cmp: &Comparison| {
            if cmp.op.holds(actual, cmp.value) {
                Outcome::Approved
            } else {
                Outcome::rejected(
                    "assertion",
                    format!("assertion failed: {what} is {actual}, expected {} {}", cmp.op, cmp.value),
                )
            }
        };
        let uint = |v: Option<TealValue>| v.and_then(|v| v.as_uint()).map_or(0, i128::from);
        match assertion {
            Assertion::AlgoBalance { account, cmp } => {
                let v = self.ledger.balance(&self.addr(account)).0;
                compare(format!("algo balance of {account}"), v.into(), cmp)
            }
            Assertion::StablecoinBalance { account, cmp } => {
                let v = self.stablecoin_balance(&self.addr(account));
                compare(format!("stablecoin balance of {account}"), v.into(), cmp)
            }
            Assertion::BondBalance { account, bond, cmp } => {
                let v = self.ledger.asset_balance(&self.addr(account), self.deployment(bond).bond_id);
                compare(format!("{bond} balance of {account}"), v.into(), cmp)
            }
            Assertion::Circulation { bond, cmp } => {
                let v = self.deployment(bond).circulation(&self.ledger);
                compare(format!("circulation of {bond}"), v.into(), cmp)
            }
            Assertion::GlobalState { bond, key, cmp } => {
                let v = uint(self.global(&self.deployment(bond), key));
                compare(format!("{bond} global {key}"), v, cmp)
            }
            Assertion::LocalState { account, bond, key, cmp } => {
                let d = self.deployment(bond);
                let v = uint(self.ledger.local_value(&self.addr(account), d.main_app, key.as_bytes()).cloned());
                compare(format!("{bond} local {key} of {account}"), v, cmp)
            }
            Assertion::Rating { bond, index, cmp } => match self.deployment(bond).rating(&self.ledger, *index) {
                Ok(r) => compare(format!("{bond} rating {index}"), r.into(), cmp),
                Err(e) => Outcome::rejected("assertion", format!("assertion failed: {e}")),
            },
            Assertion::CostTotal { account, label, cmp } => {
                let a = self.addr(account);
                let costs = self.ledger.costs();
                let v = match label {
                    Some(l) => costs.row(&a, l).map_or(0, |r| r.total()),
                    None => labels::PROTOCOL.iter().filter_map(|l| costs.row(&a, l)).map(|r| r.total()).sum(),
                };
                let what = match label {
                    Some(l) => format!("cost of {l:?} for {account}"),
                    None => format!("protocol cost total of {account}"),
                };
                compare(what, v.into(), cmp)
            }
            Assertion::Rejected { code } => match (&self.last, code) {
                (Some(Outcome::Rejected { code: got, .. }), Some(want)) if got != want => Outcome::rejected(
                    "assertion",
                    format!("assertion failed: previous step rejected with {got}, expected {want}"),
                ),
                (Some(Outcome::Rejected { .. }), _) => Outcome::Approved,
                _ => Outcome::rejected("assertion", "assertion failed: previous step was not rejected"),
            },
            Assertion::Approved => match &self.last {
                Some(Outcome::Approved) => Outcome::Approved,
                _ => Outcome::rejected("assertion", "assertion failed: previous step was not approved"),
            },
        }
    }

    fn snapshot(&self) -> Snapshot {
        let mut out = Vec::new();
        let mut named: Vec<(String, Address)> = self.accounts.clone();
        for (b, d) in &self.bonds {
            named.push((format!("{b}:bond-escrow"), d.bond_escrow));
            named.push((format!("{b}:stablecoin-escrow"), d.stablecoin_escrow));
        }
        for (name, a) in &named {
            out.push((format!("{name} algos"), self.ledger.balance(a).0.to_string()));
            if let Some(s) = self.stablecoin() {
                out.push((format!("{name} stablecoin"), self.ledger.asset_balance(a, s).to_string()));
            }
            for (b, d) in &self.bonds {
                out.push((format!("{name} {b}"), self.ledger.asset_balance(a, d.bond_id).to_string()));
                if let Some(local) = self.ledger.local_state(a, d.main_app) {
                    for (k, v) in local {
                        out.push((format!("{name} {b}.local.{}", String::from_utf8_lossy(k)), v.to_string()));
                    }
                }
            }
        }
        for (b, d) in &self.bonds {
            for app in [d.main_app, d.manage_app] {
                for (k, v) in self.ledger.global_state(app).into_iter().flatten() {
                    let key = String::from_utf8_lossy(k);
                    let prefix = if app == d.main_app { "" } else { "manage." };
                    out.push((format!("{b}.global.{prefix}{key}"), v.to_string()));
                }
            }
        }
        out
    }
}

fn diff(before: &Snapshot, after: &Snapshot) -> Vec<String> {
    let old: BTreeMap<&str, &str> = before.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
    after
        .iter()
        .filter_map(|(k, v)| match old.get(k.as_str()) {
            Some(o) if *o == v => None,
            Some(o) => Some(format!("    {k}: {o} -> {v}")),
            None if v == "0" => None,
            None => Some(format!("    {k}: 0 -> {v}")),
        })
        .collect()
}
