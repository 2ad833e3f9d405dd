use super::*;
use crate::ledger::{AppId, MicroAlgos, Transaction, MIN_FEE};
use crate::programs::LogicProgram;

fn addr(tag: u8) -> Address {
    Address::from_bytes([tag; 32])
}

fn params(rounds: u64) -> BondParams {
    BondParams {
        total_bonds: 100,
        coupon_rounds: rounds,
        start_buy: 100,
        end_buy: 200,
        maturity: 200 + rounds.max(1) * 100,
        bond_cost: 100 * UNIT,
        coupon_base: 5 * UNIT,
        principal: 100 * UNIT,
        issuer: addr(1),
        green_verifier: addr(2),
        financial_regulator: addr(3),
        stablecoin_id: AssetId(9),
    }
}

#[test]
fn coupon_penalties_compound_per_star() {
    let base = 5 * UNIT;
    let got: Vec<u64> = (1..=5).rev().map(|r| effective_coupon(base, r).unwrap()).collect();
    assert_eq!(got, [5_000_000, 5_500_000, 6_050_000, 6_655_000, 7_320_500]);
    assert_eq!(effective_coupon(base, 0).unwrap(), base);
    assert_eq!(effective_coupon(base, 6), Err(RatingError::OutOfRange(6)));
    assert_eq!(effective_coupon(u64::MAX, 1), Err(RatingError::Overflow(u64::MAX)));
    // Floors rather than rounds.
    assert_eq!(effective_coupon(1, 4).unwrap(), 1);
    assert_eq!(effective_coupon(19, 1).unwrap(), 27);
}

#[test]
fn usd_display_rounds_half_up() {
    assert_eq!(display_usd(6_655_000), "$6.66");
    assert_eq!(display_usd(7_320_500), "$7.32");
    assert_eq!(display_usd(5_000_000), "$5.00");
    assert_eq!(display_usd(4_999), "$0.00");
    assert_eq!(display_usd(5_000), "$0.01");
    assert_eq!(display_usd(0), "$0.00");
}

#[test]
fn scale_floors_fractional_bonds() {
    assert_eq!(scale(UNIT / 2, 1_000 * UNIT), 500 * u128::from(UNIT));
    assert_eq!(scale(1, 999_999), 0);
    assert_eq!(scale(u64::MAX, u64::MAX), u128::from(u64::MAX) * u128::from(u64::MAX) / u128::from(UNIT));
}

#[test]
fn rating_packing_layout() {
    assert_eq!(ratings_per_key(0), 1);
    assert_eq!(ratings_per_key(7), 1);
    assert_eq!(ratings_per_key(8), 2);
    assert_eq!(ratings_per_key(10), 2);
    assert_eq!(rating_key(7), b"0");
    assert_eq!(rating_key(8), b"1");
    assert_eq!(rating_key(17), b"2");

    let mut v: Option<Vec<u8>> = None;
    for (i, r) in [5u8, 3, 4].into_iter().enumerate() {
        v = Some(write_packed(v.as_deref(), i as u64, r));
    }
    assert_eq!(v.as_deref(), Some(&[5u8, 3, 4, 0, 0, 0, 0, 0][..]));
    assert_eq!(read_packed(v.as_deref(), 1), 3);
    assert_eq!(read_packed(v.as_deref(), 6), 0);
    assert_eq!(read_packed(None, 0), 0);
    let v = write_packed(v.as_deref(), 9, 2);
    assert_eq!(v, [5, 2, 4, 0, 0, 0, 0, 0]);
}

#[test]
fn params_validation() {
    assert!(params(10).validate().is_ok());
    let mut p = params(2);
    p.end_buy = p.start_buy;
    assert!(p.validate().is_err());
    let mut p = params(2);
    p.principal = 0;
    assert!(p.validate().is_err());
    let mut p = params(2);
    p.total_bonds = 0;
    assert!(p.validate().is_err());
    let mut p = params(500);
    p.maturity = p.end_buy + 1;
    assert!(p.validate().is_err());
    let mut p = params(8 * 64);
    p.maturity = p.end_buy + 10_000;
    assert!(p.validate().is_err());
    assert_eq!(params(0).coupon_period(), None);
    assert_eq!(params(4).coupon_period(), Some(100));
    assert_eq!(params(10).rating_slots(), 2);
}

#[test]
fn coupon_rounds_come_due_each_period() {
    let p = params(3);
    assert_eq!(coupon_round_at(&p, 0), 0);
    assert_eq!(coupon_round_at(&p, 299), 0);
    assert_eq!(coupon_round_at(&p, 300), 1);
    assert_eq!(coupon_round_at(&p, 499), 2);
    assert_eq!(coupon_round_at(&p, 500), 3);
    assert_eq!(coupon_round_at(&p, 10_000), 3);
    assert_eq!(coupon_round_at(&params(0), 10_000), 0);
}

#[test]
fn rating_slots_follow_the_calendar() {
    let p = params(3);
    assert_eq!(ManageApp::rating_slot(&p, 0), Some(0));
    assert_eq!(ManageApp::rating_slot(&p, 99), Some(0));
    assert_eq!(ManageApp::rating_slot(&p, 100), None);
    assert_eq!(ManageApp::rating_slot(&p, 200), Some(1));
    assert_eq!(ManageApp::rating_slot(&p, 350), Some(2));
    assert_eq!(ManageApp::rating_slot(&p, 450), Some(3));
    assert_eq!(ManageApp::rating_slot(&p, 500), None);
}

fn offer() -> TradeOfferProgram {
    TradeOfferProgram {
        seller: addr(10),
        price: 1_000 * UNIT,
        expiry: 500,
        main_app: AppId(5),
        bond_escrow: addr(11),
        bond_id: AssetId(6),
        stablecoin_id: AssetId(9),
    }
}

fn trade_group(o: &TradeOfferProgram, n: u64, paid: u64, last_valid: u64) -> Vec<Transaction> {
    let buyer = addr(12);
    vec![
        Transaction::app_call(o.seller, o.main_app, crate::ledger::OnComplete::NoOp, vec![actions::TRADE.into()], 0)
            .with_last_valid(last_valid),
        Transaction::payment(o.seller, o.bond_escrow, MIN_FEE, 0).with_last_valid(last_valid),
        Transaction::clawback(o.bond_escrow, o.bond_id, o.seller, buyer, n, 0),
        Transaction::asset_transfer(buyer, o.stablecoin_id, o.seller, paid, 0),
    ]
}

#[test]
fn trade_offer_checks_price_shape_and_expiry() {
    let o = offer();
    let good = trade_group(&o, UNIT / 2, 500 * UNIT, 499);
    assert!(o.approve(&good, 0, &[]).is_ok());
    assert!(o.approve(&good, 1, &[]).is_ok());
    assert!(o.approve(&good, 2, &[]).is_err());

    let underpaid = trade_group(&o, UNIT / 2, 500 * UNIT - 1, 499);
    assert!(o.approve(&underpaid, 0, &[]).is_err());

    let late = trade_group(&o, UNIT / 2, 500 * UNIT, 500);
    assert!(o.approve(&late, 0, &[]).is_err());

    let mut fat_fee = trade_group(&o, UNIT / 2, 500 * UNIT, 499);
    fat_fee[1] = Transaction::payment(o.seller, o.bond_escrow, MicroAlgos(5_000), 0).with_last_valid(499);
    assert!(o.approve(&fat_fee, 1, &[]).is_err());

    let short = &good[..3];
    assert!(o.approve(short, 0, &[]).is_err());
}

#[test]
fn escrow_identities_bind_their_parameters() {
    let a = BondEscrow { main_app: AppId(1), bond_id: AssetId(2) };
    let b = BondEscrow { main_app: AppId(1), bond_id: AssetId(3) };
    assert_ne!(a.identity(), b.identity());
    let mut o2 = offer();
    o2.price += 1;
    assert_ne!(offer().identity(), o2.identity());
}

#[test]
fn bond_escrow_signs_only_approved_clawbacks() {
    let e = BondEscrow { main_app: AppId(1), bond_id: AssetId(2) };
    let me = addr(20);
    let opt_in = vec![Transaction::asset_opt_in(me, AssetId(2), 0)];
    assert!(e.approve(&opt_in, 0, &[]).is_ok());
    let wrong_asset = vec![Transaction::asset_opt_in(me, AssetId(7), 0)];
    assert!(e.approve(&wrong_asset, 0, &[]).is_err());
    let drain = vec![Transaction::payment(me, addr(21), MicroAlgos(1), 0)];
    assert!(e.approve(&drain, 0, &[]).is_err());
}
