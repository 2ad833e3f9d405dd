//! Scenario scripts: one step per line, `#` starts a comment.
//!
//! Names are bound by `create-account`, `issue`, `offer` and `report-put` and
//! must be bound before use. Amounts are base units, `$12.50` (dollars),
//! `1.5bonds` or `2algos`; all three suffix forms scale by 10^6.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::greenbond::UNIT;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "==" => CmpOp::Eq,
            "!=" => CmpOp::Ne,
            "<" => CmpOp::Lt,
            "<=" => CmpOp::Le,
            ">" => CmpOp::Gt,
            ">=" => CmpOp::Ge,
            _ => return None,
        })
    }

    pub fn holds(self, actual: i128, expected: i128) -> bool {
        match self {
            CmpOp::Eq => actual == expected,
            CmpOp::Ne => actual != expected,
            CmpOp::Lt => actual < expected,
            CmpOp::Le => actual <= expected,
            CmpOp::Gt => actual > expected,
            CmpOp::Ge => actual >= expected,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Comparison {
    pub op: CmpOp,
    pub value: i128,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IssueTerms {
    pub operator: String,
    pub issuer: String,
    pub verifier: String,
    pub regulator: String,
    pub total_bonds: u64,
    pub coupon_rounds: u64,
    pub start_buy: u64,
    pub end_buy: u64,
    pub maturity: u64,
    pub bond_cost: u64,
    pub coupon: u64,
    pub principal: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FreezeTarget {
    All,
    Account(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReportSource {
    File(PathBuf),
    Inline(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Assertion {
    AlgoBalance { account: String, cmp: Comparison },
    StablecoinBalance { account: String, cmp: Comparison },
    BondBalance { account: String, bond: String, cmp: Comparison },
    Circulation { bond: String, cmp: Comparison },
    GlobalState { bond: String, key: String, cmp: Comparison },
    LocalState { account: String, bond: String, key: String, cmp: Comparison },
    Rating { bond: String, index: u64, cmp: Comparison },
    CostTotal { account: String, label: Option<String>, cmp: Comparison },
    /// The previous ledger step was rejected, optionally with this code.
    Rejected { code: Option<String> },
    Approved,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step {
    CreateAccount { name: String },
    FundAlgos { account: String, amount: u64 },
    FundStablecoin { account: String, amount: u64 },
    Issue { bond: String, terms: IssueTerms },
    OptIn { account: String, bond: String },
    ApproveBond { regulator: String, bond: String },
    ApproveAccount { regulator: String, bond: String, account: String },
    Freeze { regulator: String, bond: String, target: FreezeTarget, value: u64 },
    Buy { account: String, bond: String, amount: u64 },
    SetTrade { account: String, bond: String, amount: u64 },
    Offer { offer: String, seller: String, bond: String, price: u64, expiry: u64 },
    Trade { buyer: String, offer: String, amount: u64 },
    FundEscrow { account: String, bond: String, amount: u64 },
    Rate { account: String, bond: String, rating: u64 },
    ClaimCoupon { account: String, bond: String },
    ClaimPrincipal { account: String, bond: String },
    ClaimDefault { account: String, bond: String },
    ReportPut { report: String, source: ReportSource },
    ReportAnchor { account: String, bond: String, report: String },
    AdvanceTime { to: u64 },
    Assert(Assertion),
}

impl Step {
    /// Whether the step submits to the ledger (and so updates the outcome
    /// that `assert rejected` inspects).
    pub fn submits(&self) -> bool {
        !matches!(
            self,
            Step::CreateAccount { .. }
                | Step::FundAlgos { .. }
                | Step::Offer { .. }
                | Step::ReportPut { .. }
                | Step::AdvanceTime { .. }
                | Step::Assert(_)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioStep {
    pub line: usize,
    /// The step as written, whitespace-normalized.
    pub text: String,
    pub step: Step,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Scenario {
    pub steps: Vec<ScenarioStep>,
}

/// Splits on whitespace; double quotes group words.
fn tokenize(line: &str) -> Result<Vec<String>, String> {
    let mut tokens = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '"' {
            chars.next();
            let mut tok = String::new();
            loop {
                match chars.next() {
                    Some('"') => break,
                    Some(c) => tok.push(c),
                    None => return Err("unterminated quote".into()),
                }
            }
            tokens.push(tok);
        } else {
            let mut tok = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() {
                    break;
                }
                tok.push(c);
                chars.next();
            }
            tokens.push(tok);
        }
    }
    Ok(tokens)
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quote = !in_quote,
            '#' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Parses a non-negative decimal with at most six fractional digits, scaled by 10^6.
fn parse_scaled(s: &str) -> Option<u64> {
    let s = s.replace([',', '_'], "");
    let (whole, frac) = s.split_once('.').unwrap_or((&s, ""));
    if whole.is_empty() && frac.is_empty() || frac.len() > 6 {
        return None;
    }
    if !whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let whole: u64 = if whole.is_empty() { 0 } else { whole.parse().ok()? };
    let frac: u64 = format!("{frac:0<6}").parse().ok()?;
    whole.checked_mul(UNIT)?.checked_add(frac)
}

/// Parses an amount: plain base units, `$dollars`, `Nbonds` or `Nalgos`.
pub fn parse_amount(s: &str) -> Option<u64> {
    if let Some(d) = s.strip_prefix('$') {
        return parse_scaled(d);
    }
    for suffix in ["bonds", "bond", "algos", "algo"] {
        if let Some(n) = s.strip_suffix(suffix) {
            return parse_scaled(n);
        }
    }
    let plain = s.replace('_', "");
    if plain.is_empty() || !plain.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    plain.parse().ok()
}

fn parse_int(s: &str) -> Option<u64> {
    let plain = s.replace('_', "");
    if plain.is_empty() || !plain.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    plain.parse().ok()
}

fn parse_signed(s: &str) -> Option<i128> {
    match s.strip_prefix('-') {
        Some(rest) => parse_amount(rest).map(|v| -i128::from(v)),
        None => parse_amount(s).map(i128::from),
    }
}

struct Names {
    accounts: BTreeSet<String>,
    bonds: BTreeSet<String>,
    offers: BTreeSet<String>,
    reports: BTreeSet<String>,
    now: u64,
}

struct LineParser<'a> {
    tokens: Vec<String>,
    pos: usize,
    names: &'a mut Names,
    base_dir: &'a Path,
}

type Res<T> = Result<T, String>;

impl LineParser<'_> {
    fn next(&mut self, what: &str) -> Res<String> {
        let t = self.tokens.get(self.pos).cloned().ok_or_else(|| format!("missing {what}"))?;
        self.pos += 1;
        Ok(t)
    }

    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.pos).map(String::as_str)
    }

    fn remaining(&self) -> usize {
        self.tokens.len() - self.pos
    }

    fn done(&self) -> Res<()> {
        match self.tokens.get(self.pos) {
            None => Ok(()),
            Some(t) => Err(format!("unexpected {t:?}")),
        }
    }

    fn fresh(&self, set: &BTreeSet<String>, name: &str, kind: &str) -> Res<()> {
        if name.contains(':') {
            return Err(format!("{kind} name {name:?} may not contain ':'"));
        }
        if set.contains(name) {
            return Err(format!("{kind} {name:?} already defined"));
        }
        Ok(())
    }

    fn account(&mut self) -> Res<String> {
        let name = self.next("account name")?;
        if let Some((bond, role)) = name.split_once(':') {
            if !self.names.bonds.contains(bond) {
                return Err(format!("unknown bond {bond:?}"));
            }
            if !matches!(role, "bond-escrow" | "stablecoin-escrow" | "operator") {
                return Err(format!("unknown bond account {role:?}"));
            }
        } else if !self.names.accounts.contains(&name) {
            return Err(format!("unknown account {name:?}"));
        }
        Ok(name)
    }

    fn bond(&mut self) -> Res<String> {
        let name = self.next("bond name")?;
        if !self.names.bonds.contains(&name) {
            return Err(format!("unknown bond {name:?}"));
        }
        Ok(name)
    }

    fn amount(&mut self) -> Res<u64> {
        let t = self.next("amount")?;
        parse_amount(&t).ok_or_else(|| format!("invalid amount {t:?}"))
    }

    fn int(&mut self, what: &str) -> Res<u64> {
        let t = self.next(what)?;
        parse_int(&t).ok_or_else(|| format!("invalid {what} {t:?}"))
    }

    fn comparison(&mut self) -> Res<Comparison> {
        let op = self.next("comparison operator")?;
        let op = CmpOp::parse(&op).ok_or_else(|| format!("invalid operator {op:?}"))?;
        let v = self.next("expected value")?;
        let value = parse_signed(&v).ok_or_else(|| format!("invalid value {v:?}"))?;
        Ok(Comparison { op, value })
    }

    fn issue(&mut self) -> Res<Step> {
        let bond = self.next("bond name")?;
        self.fresh(&self.names.bonds, &bond, "bond")?;
        let mut kv = std::collections::BTreeMap::new();
        while let Some(t) = self.peek().map(str::to_owned) {
            self.pos += 1;
            let (k, v) = t.split_once('=').ok_or_else(|| format!("expected key=value, got {t:?}"))?;
            if kv.insert(k.to_owned(), v.to_owned()).is_some() {
                return Err(format!("duplicate key {k:?}"));
            }
        }
        let mut take = |k: &str| kv.remove(k).ok_or_else(|| format!("issue needs {k}="));
        let mut role = |k: &str, names: &Names| -> Res<String> {
            let v = take(k)?;
            if !names.accounts.contains(&v) {
                return Err(format!("unknown account {v:?}"));
            }
            Ok(v)
        };
        let operator = role("operator", self.names)?;
        let issuer = role("issuer", self.names)?;
        let verifier = role("verifier", self.names)?;
        let regulator = role("regulator", self.names)?;
        let mut int = |k: &str| -> Res<u64> {
            let v = take(k)?;
            parse_int(&v).ok_or_else(|| format!("invalid {k} {v:?}"))
        };
        let total_bonds = int("bonds")?;
        let coupon_rounds = int("rounds")?;
        let start_buy = int("start-buy")?;
        let end_buy = int("end-buy")?;
        let maturity = int("maturity")?;
        let mut money = |k: &str| -> Res<u64> {
            let v = take(k)?;
            parse_amount(&v).ok_or_else(|| format!("invalid {k} {v:?}"))
        };
        let bond_cost = money("cost")?;
        let coupon = money("coupon")?;
        let principal = money("principal")?;
        if let Some(k) = kv.keys().next() {
            return Err(format!("unknown issue key {k:?}"));
        }
        self.names.bonds.insert(bond.clone());
        Ok(Step::Issue {
            bond,
            terms: IssueTerms {
                operator,
                issuer,
                verifier,
                regulator,
                total_bonds,
                coupon_rounds,
                start_buy,
                end_buy,
                maturity,
                bond_cost,
                coupon,
                principal,
            },
        })
    }

    fn assertion(&mut self) -> Res<Assertion> {
        let kind = self.next("assertion kind")?;
        Ok(match kind.as_str() {
            "algo-balance" => Assertion::AlgoBalance { account: self.account()?, cmp: self.comparison()? },
            "stablecoin-balance" => {
                Assertion::StablecoinBalance { account: self.account()?, cmp: self.comparison()? }
            }
            "bond-balance" => Assertion::BondBalance {
                account: self.account()?,
                bond: self.bond()?,
                cmp: self.comparison()?,
            },
            "circulation" => Assertion::Circulation { bond: self.bond()?, cmp: self.comparison()? },
            "global-state" => Assertion::GlobalState {
                bond: self.bond()?,
                key: self.next("state key")?,
                cmp: self.comparison()?,
            },
            "local-state" => Assertion::LocalState {
                account: self.account()?,
                bond: self.bond()?,
                key: self.next("state key")?,
                cmp: self.comparison()?,
            },
            "rating" => Assertion::Rating {
                bond: self.bond()?,
                index: self.int("rating index")?,
                cmp: self.comparison()?,
            },
            "cost-total" => {
                let account = self.account()?;
                let label = if self.remaining() == 3 { Some(self.next("label")?) } else { None };
                Assertion::CostTotal { account, label, cmp: self.comparison()? }
            }
            "rejected" => {
                let code = if self.remaining() > 0 { Some(self.next("code")?) } else { None };
                Assertion::Rejected { code }
            }
            "approved" => Assertion::Approved,
            other => return Err(format!("unknown assertion {other:?}")),
        })
    }

    fn step(&mut self) -> Res<Step> {
        let keyword = self.next("step")?;
        let step = match keyword.as_str() {
            "create-account" => {
                let name = self.next("account name")?;
                self.fresh(&self.names.accounts, &name, "account")?;
                self.names.accounts.insert(name.clone());
                Step::CreateAccount { name }
            }
            "fund-algos" => Step::FundAlgos { account: self.account()?, amount: self.amount()? },
            "fund-stablecoin" => Step::FundStablecoin { account: self.account()?, amount: self.amount()? },
            "issue" => self.issue()?,
            "opt-in" => Step::OptIn { account: self.account()?, bond: self.bond()? },
            "approve-bond" => Step::ApproveBond { regulator: self.account()?, bond: self.bond()? },
            "approve-account" => Step::ApproveAccount {
                regulator: self.account()?,
                bond: self.bond()?,
                account: self.account()?,
            },
            "freeze" => {
                let regulator = self.account()?;
                let bond = self.bond()?;
                let target = if self.peek() == Some("all") {
                    self.pos += 1;
                    FreezeTarget::All
                } else {
                    FreezeTarget::Account(self.account()?)
                };
                let value = if self.remaining() > 0 { self.int("freeze value")? } else { 0 };
                Step::Freeze { regulator, bond, target, value }
            }
            "buy" => Step::Buy { account: self.account()?, bond: self.bond()?, amount: self.amount()? },
            "set-trade" => Step::SetTrade { account: self.account()?, bond: self.bond()?, amount: self.amount()? },
            "offer" => {
                let offer = self.next("offer name")?;
                self.fresh(&self.names.offers, &offer, "offer")?;
                let step = Step::Offer {
                    offer: offer.clone(),
                    seller: self.account()?,
                    bond: self.bond()?,
                    price: self.amount()?,
                    expiry: self.int("expiry")?,
                };
                self.names.offers.insert(offer);
                step
            }
            "trade" => {
                let buyer = self.account()?;
                let offer = self.next("offer name")?;
                if !self.names.offers.contains(&offer) {
                    return Err(format!("unknown offer {offer:?}"));
                }
                Step::Trade { buyer, offer, amount: self.amount()? }
            }
            "fund-escrow" => Step::FundEscrow { account: self.account()?, bond: self.bond()?, amount: self.amount()? },
            "rate" => Step::Rate { account: self.account()?, bond: self.bond()?, rating: self.int("rating")? },
            "claim-coupon" => Step::ClaimCoupon { account: self.account()?, bond: self.bond()? },
            "claim-principal" => Step::ClaimPrincipal { account: self.account()?, bond: self.bond()? },
            "claim-default" => Step::ClaimDefault { account: self.account()?, bond: self.bond()? },
            "report-put" => {
                let report = self.next("report name")?;
                self.fresh(&self.names.reports, &report, "report")?;
                let src = self.next("report source")?;
                let source = match src.strip_prefix("inline:") {
                    Some(text) => ReportSource::Inline(text.to_owned()),
                    None => ReportSource::File(self.base_dir.join(src)),
                };
                self.names.reports.insert(report.clone());
                Step::ReportPut { report, source }
            }
            "report-anchor" => {
                let account = self.account()?;
                let bond = self.bond()?;
                let report = self.next("report name")?;
                if !self.names.reports.contains(&report) {
                    return Err(format!("unknown report {report:?}"));
                }
                Step::ReportAnchor { account, bond, report }
            }
            "advance-time" => {
                let to = self.int("timestamp")?;
                if to < self.names.now {
                    return Err(format!("time {to} is before {}", self.names.now));
                }
                self.names.now = to;
                Step::AdvanceTime { to }
            }
            "assert" => Step::Assert(self.assertion()?),
            other => return Err(format!("unknown step {other:?}")),
        };
        self.done()?;
        Ok(step)
    }
}

impl Scenario {
    /// Parses a script. Relative report paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ParseError> {
        let mut names = Names {
            accounts: BTreeSet::new(),
            bonds: BTreeSet::new(),
            offers: BTreeSet::new(),
            reports: BTreeSet::new(),
            now: 0,
        };
        let mut steps = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| ParseError { line, message };
            let tokens = tokenize(strip_comment(raw)).map_err(err)?;
            if tokens.is_empty() {
                continue;
            }
            let text = strip_comment(raw).split_whitespace().collect::<Vec<_>>().join(" ");
            let mut p = LineParser { tokens, pos: 0, names: &mut names, base_dir };
            let step = p.step().map_err(err)?;
            steps.push(ScenarioStep { line, text, step });
        }
        Ok(Scenario { steps })
    }
}
