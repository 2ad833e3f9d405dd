//! Ratings are stored eight to a global value: slot `i` is byte `i % 8` of
//! the value under key `i / 8` (the key is the decimal index as ASCII).

pub const RATINGS_PER_VALUE: u64 = 8;

/// Number of global values needed for the use-of-proceeds rating plus one
/// rating per coupon round.
pub fn ratings_per_key(coupon_rounds: u64) -> u64 {
    (coupon_rounds + 1).div_ceil(RATINGS_PER_VALUE)
}

pub fn rating_key(index: u64) -> Vec<u8> {
    (index / RATINGS_PER_VALUE).to_string().into_bytes()
}

/// Reads slot `index` from the packed value stored under [`rating_key`].
pub fn read_packed(value: Option<&[u8]>, index: u64) -> u8 {
    let pos = (index % RATINGS_PER_VALUE) as usize;
    value.and_then(|v| v.get(pos)).copied().unwrap_or(0)
}

/// Returns the packed value with slot `index` set to `rating`.
pub fn write_packed(value: Option<&[u8]>, index: u64, rating: u8) -> Vec<u8> {
    let mut packed = [0u8; RATINGS_PER_VALUE as usize];
    if let Some(v) = value {
        let n = v.len().min(packed.len());
        packed[..n].copy_from_slice(&v[..n]);
    }
    packed[(index % RATINGS_PER_VALUE) as usize] = rating;
    packed.to_vec()
}
