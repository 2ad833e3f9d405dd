//! Theoretical bond prices and how green ratings move them.
//!
//! Analytics only: everything here is `f64` and never touches ledger balances.

use std::io;

use crate::greenbond::{effective_coupon, RatingError};

#[derive(Debug, thiserror::Error)]
pub enum PricingError {
    #[error("discount rate {0} must be greater than -1")]
    Rate(f64),
    #[error(transparent)]
    Rating(#[from] RatingError),
    #[error("sweep has no values")]
    EmptySweep,
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Present value of `periods` coupons of `coupon` plus `face` at maturity,
/// discounted at `rate` per period.
pub fn price(coupon: f64, rate: f64, face: f64, periods: u32) -> Result<f64, PricingError> {
    if rate <= -1.0 || rate.is_nan() {
        return Err(PricingError::Rate(rate));
    }
    let t = f64::from(periods);
    if rate == 0.0 {
        return Ok(coupon * t + face);
    }
    let discount = (1.0 + rate).powf(-t);
    Ok(coupon * (1.0 - discount) / rate + face * discount)
}

/// Multiplier applied to the five-star coupon at `rating`: 1.1 per star lost.
pub fn penalty_multiplier(rating: u8) -> Result<f64, PricingError> {
    if !(1..=5).contains(&rating) {
        return Err(RatingError::OutOfRange(u64::from(rating)).into());
    }
    Ok(1.1f64.powi(i32::from(5 - rating)))
}

/// Price of a bond whose coupon is `coupon_base` at five stars, rated `rating`.
pub fn rated_price(coupon_base: f64, rating: u8, rate: f64, face: f64, periods: u32) -> Result<f64, PricingError> {
    let coupon = coupon_base * penalty_multiplier(rating)?;
    price(coupon, rate, face, periods)
}

/// [`rated_price`] for integer base-unit coupons, using the ledger's exact
/// coupon arithmetic.
pub fn rated_price_units(coupon_base: u64, rating: u8, rate: f64, face: f64, periods: u32) -> Result<f64, PricingError> {
    if rating == 0 {
        return Err(RatingError::OutOfRange(0).into());
    }
    let coupon = effective_coupon(coupon_base, rating)? as f64;
    price(coupon, rate, face, periods)
}

/// What a curve varies across its families.
#[derive(Clone, Debug, PartialEq)]
pub enum Sweep {
    /// Periods to maturity, at a fixed coupon rate (coupon = rate × face).
    Periods { values: Vec<u32>, coupon_rate: f64 },
    /// Coupon rate as a fraction of face, at a fixed number of periods.
    CouponRate { values: Vec<f64>, periods: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub rating: u8,
    pub sweep_value: f64,
    pub price: f64,
}

/// Price for every rating 1..=5 and every sweep value, ordered by sweep
/// value then rating.
pub fn curve(sweep: &Sweep, face: f64, rate: f64) -> Result<Vec<CurvePoint>, PricingError> {
    let mut rows = Vec::new();
    match sweep {
        Sweep::Periods { values, coupon_rate } => {
            if values.is_empty() {
                return Err(PricingError::EmptySweep);
            }
            for &t in values {
                for rating in 1..=5 {
                    let price = rated_price(coupon_rate * face, rating, rate, face, t)?;
                    rows.push(CurvePoint { rating, sweep_value: f64::from(t), price });
                }
            }
        }
        Sweep::CouponRate { values, periods } => {
            if values.is_empty() {
                return Err(PricingError::EmptySweep);
            }
            for &c in values {
                for rating in 1..=5 {
                    let price = rated_price(c * face, rating, rate, face, *periods)?;
                    rows.push(CurvePoint { rating, sweep_value: c, price });
                }
            }
        }
    }
    Ok(rows)
}

/// Writes `rows` as CSV with header `rating,sweep_value,price`. Floats use
/// the shortest representation that parses back to the same value.
pub fn write_curve_csv<W: io::Write>(rows: &[CurvePoint], out: W) -> Result<(), PricingError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rating", "sweep_value", "price"])?;
    for r in rows {
        w.write_record([r.rating.to_string(), r.sweep_value.to_string(), r.price.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Parses CSV produced by [`write_curve_csv`].
pub fn read_curve_csv<R: io::Read>(input: R) -> Result<Vec<CurvePoint>, PricingError> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or_default().to_owned();
        let bad = |f: String| {
            PricingError::Io(io::Error::new(io::ErrorKind::InvalidData, format!("bad field {f:?}")))
        };
        rows.push(CurvePoint {
            rating: field(0).parse().map_err(|_| bad(field(0)))?,
            sweep_value: field(1).parse().map_err(|_| bad(field(1)))?,
            price: field(2).parse().map_err(|_| bad(field(2)))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Term-by-term present value.
    fn summed(c: f64, r: f64, f: f64, t: u32) -> f64 {
        let mut p = 0.0;
        for k in 1..=t {
            p += c / (1.0 + r).powi(k as i32);
        }
        p + f / (1.0 + r).powi(t as i32)
    }

    #[test]
    fn zero_coupon_discounts_face() {
        let p = price(0.0, 0.05, 100.0, 10).unwrap();
        assert!((p - 61.391_325_354_075_65).abs() < 1e-9, "{p}");
    }

    #[test]
    fn par_bond() {
        for t in [1, 5, 10, 30] {
            assert!((price(5.0, 0.05, 100.0, t).unwrap() - 100.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_rate_is_the_limit() {
        assert_eq!(price(5.0, 0.0, 100.0, 10).unwrap(), 150.0);
        let near = price(5.0, 1e-9, 100.0, 10).unwrap();
        assert!((near - 150.0).abs() < 1e-5);
    }

    #[test]
    fn rejects_rate_at_or_below_minus_one() {
        assert!(matches!(price(1.0, -1.0, 100.0, 3), Err(PricingError::Rate(_))));
        assert!(price(1.0, -0.5, 100.0, 3).is_ok());
    }

    #[test]
    fn closed_form_matches_summation() {
        for (c, r, f, t) in [(3.0, 0.04, 100.0, 7), (12.5, 0.11, 1000.0, 30), (0.1, -0.2, 5.0, 4)] {
            let a = price(c, r, f, t).unwrap();
            let b = summed(c, r, f, t);
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn ratings_order_prices() {
        let prices: Vec<f64> = (1..=5).map(|r| rated_price(5.0, r, 0.05, 100.0, 10).unwrap()).collect();
        assert!(prices.windows(2).all(|w| w[0] > w[1]), "{prices:?}");
        assert_eq!(rated_price(5.0, 5, 0.05, 100.0, 10).unwrap(), price(5.0, 0.05, 100.0, 10).unwrap());
        assert!(rated_price(5.0, 6, 0.05, 100.0, 10).is_err());
    }

    #[test]
    fn unit_pricing_uses_exact_coupons() {
        let p = rated_price_units(5_000_000, 3, 0.05, 100_000_000.0, 1).unwrap();
        assert_eq!(p, price(6_050_000.0, 0.05, 100_000_000.0, 1).unwrap());
    }

    #[test]
    fn curve_shape_and_csv_round_trip() {
        let rows = curve(&Sweep::Periods { values: vec![5, 10, 15, 20], coupon_rate: 0.05 }, 100.0, 0.05).unwrap();
        assert_eq!(rows.len(), 20);
        for row in rows.iter().filter(|r| r.rating == 5) {
            assert!((row.price - 100.0).abs() < 1e-9);
        }
        let mut buf = Vec::new();
        write_curve_csv(&rows, &mut buf).unwrap();
        assert!(buf.starts_with(b"rating,sweep_value,price\n"));
        assert_eq!(read_curve_csv(buf.as_slice()).unwrap(), rows);
        assert!(matches!(
            curve(&Sweep::CouponRate { values: vec![], periods: 3 }, 100.0, 0.05),
            Err(PricingError::EmptySweep)
        ));
    }
}
