//! Exact integer and rational primitives shared by every module.
//!
//! Nothing in here touches floating point. Fractional powers are compared by
//! raising both sides to the denominator of the exponent:
//! `u < C * b^(p/q)` is decided as `u^q < C^q * b^p`.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Floor of the `ell`-th root of `b`: the unique `x` with `x^ell <= b < (x+1)^ell`.
///
/// Bitwise construction from the top, every candidate checked by exact
/// (overflow-aware) multiplication.
pub fn floor_root(ell: u32, b: u64) -> u64 {
    assert!(ell >= 1, "root degree must be positive");
    if ell == 1 || b < 2 {
        return b;
    }
    // x < 2^ceil(64 / ell)
    let bits = 64u32.div_ceil(ell);
    let mut x = 0u64;
    for bit in (0..bits).rev() {
        let candidate = x | (1u64 << bit);
        if pow_le(candidate, ell, b) {
            x = candidate;
        }
    }
    x
}

/// `base^exp <= bound`, without overflow.
fn pow_le(base: u64, exp: u32, bound: u64) -> bool {
    let mut acc: u64 = 1;
    for _ in 0..exp {
        match acc.checked_mul(base) {
            Some(v) if v <= bound => acc = v,
            _ => return false,
        }
    }
    true
}

/// Floor of the `ell`-th root of an arbitrary-precision integer.
pub fn floor_root_big(ell: u32, b: &BigUint) -> BigUint {
    assert!(ell >= 1, "root degree must be positive");
    let x = b.nth_root(ell);
    debug_assert!(Pow::pow(&x, ell) <= *b && (&x + 1u32).pow(ell) > *b);
    x
}

/// Exact `base^p` for a small base.
pub fn big_pow(base: u64, exp: u64) -> BigUint {
    BigUint::from(base).pow(BigUint::from(exp))
}

/// Decides `u < c * b^(p/q)` exactly for `u, b >= 0`, `c > 0`, `q > 0`.
pub fn lt_scaled_power(u: u64, c: &Ratio<u64>, b: u64, exponent: &Ratio<u64>) -> bool {
    let (p, q) = (*exponent.numer(), *exponent.denom());
    let (cn, cd) = (*c.numer(), *c.denom());
    // u^q * cd^q < cn^q * b^p
    let lhs = big_pow(u, q) * big_pow(cd, q);
    let rhs = big_pow(cn, q) * big_pow(b, p);
    lhs < rhs
}

/// Largest integer `d >= 0` with `d < a^(p/q)`, i.e. the number of integers
/// in the half-open window `(a - a^(p/q), a]` minus one. Requires `a >= 1`.
pub fn largest_below_power(a: u64, exponent: &Ratio<u64>) -> u64 {
    let (p, q) = (*exponent.numer(), *exponent.denom());
    let target = big_pow(a, p);
    let q32: u32 = q.try_into().expect("exponent denominator exceeds u32");
    let root = floor_root_big(q32, &target);
    let root = root.to_u64().expect("root fits u64 for u64 base and exponent < 1");
    if big_pow(root, q) == target {
        root.saturating_sub(1)
    } else {
        root
    }
}

/// Exact `floor(base^(p/q))`.
pub fn floor_rational_power(base: u64, exponent: &Ratio<u64>) -> BigUint {
    let (p, q) = (*exponent.numer(), *exponent.denom());
    let q32: u32 = q.try_into().expect("exponent denominator exceeds u32");
    floor_root_big(q32, &big_pow(base, p))
}

/// Parses `"p/q"` or `"p"` into a reduced rational.
pub fn parse_rational(s: &str) -> Result<BigRational, String> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n = BigInt::from_str(n.trim()).map_err(|e| format!("bad numerator in {s:?}: {e}"))?;
            let d = BigInt::from_str(d.trim()).map_err(|e| format!("bad denominator in {s:?}: {e}"))?;
            if d.is_zero() {
                return Err(format!("zero denominator in {s:?}"));
            }
            Ok(BigRational::new(n, d))
        }
        None => BigInt::from_str(s)
            .map(BigRational::from_integer)
            .map_err(|e| format!("bad integer {s:?}: {e}")),
    }
}

/// Renders a rational as `"p/q"`; integers render as `"p/1"` so the format is uniform.
pub fn rational_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Display-only decimal rendering. Never feeds a verdict.
pub fn display_decimal(r: &BigRational, digits: usize) -> String {
    let neg = r.is_negative();
    let a = r.abs();
    let (int, frac) = a.numer().div_rem(a.denom());
    let scale = BigInt::from(10u32).pow(digits as u32);
    let frac_digits = (frac * scale) / a.denom();
    format!(
        "{}{}.{:0>width$}",
        if neg { "-" } else { "" },
        int,
        frac_digits,
        width = digits
    )
}

/// Base-2 logarithm bracket of a positive rational: the integer `k` with
/// `2^k <= |r| < 2^(k+1)`. Used for reporting magnitudes.
pub fn floor_log2(r: &BigRational) -> Option<i64> {
    if r.is_zero() {
        return None;
    }
    let a = r.abs();
    let mut k = a.numer().bits() as i64 - a.denom().bits() as i64;
    let two = BigRational::from_integer(BigInt::from(2));
    let pow = |k: i64| -> BigRational {
        if k >= 0 {
            two.clone().pow(k as i32)
        } else {
            BigRational::one() / two.clone().pow((-k) as i32)
        }
    };
    while pow(k) > a {
        k -= 1;
    }
    while pow(k + 1) <= a {
        k += 1;
    }
    Some(k)
}

/// `q^-k` as an exact rational.
pub fn inverse_power(q: u64, k: u64) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(big_pow(q, k)))
}

pub fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// A rational that serializes as the string `"p/q"`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(pub BigRational);

impl Rational {
    pub fn new(r: BigRational) -> Self {
        Rational(r)
    }
    pub fn inner(&self) -> &BigRational {
        &self.0
    }
}

impl From<BigRational> for Rational {
    fn from(r: BigRational) -> Self {
        Rational(r)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&rational_string(&self.0))
    }
}

impl FromStr for Rational {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_rational(s).map(Rational)
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&rational_string(&self.0))
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map(Rational).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `BigRational` fields (`#[serde(with = "crate::exact::serde_rational")]`).
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&rational_string(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Vec<BigRational>`.
pub mod serde_rational_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[BigRational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(rational_string))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigRational>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|s| parse_rational(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Serde adapter for big integers as decimal strings.
pub mod serde_bigint_str {
    use super::*;

    pub fn serialize<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let s = String::deserialize(d)?;
        BigInt::from_str(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_root_examples() {
        assert_eq!(floor_root(3, 26), 2);
        assert_eq!(floor_root(3, 27), 3);
        assert_eq!(floor_root(4, 10000), 10);
        assert_eq!(floor_root(4, 9999), 9);
        assert_eq!(floor_root(1, 12345), 12345);
        assert_eq!(floor_root(3, 0), 0);
        assert_eq!(floor_root(2, u64::MAX), 4294967295);
        assert_eq!(floor_root(3, u64::MAX), 2642245);
        assert_eq!(floor_root(64, u64::MAX), 1);
    }

    #[test]
    fn scaled_power_is_strict() {
        // 2 < 1 * 8^(1/3) is false, 1 < 8^(1/3) is true
        let one = Ratio::from_integer(1u64);
        let third = Ratio::new(1u64, 3);
        assert!(!lt_scaled_power(2, &one, 8, &third));
        assert!(lt_scaled_power(1, &one, 8, &third));
    }

    #[test]
    fn window_below_power() {
        let e = Ratio::new(4059u64, 16384);
        // 1 < 2^(4059/16384) < 2
        assert_eq!(largest_below_power(2, &e), 1);
        // a^(1/2) for a perfect square: d < 3 means d <= 2
        assert_eq!(largest_below_power(9, &Ratio::new(1, 2)), 2);
        assert_eq!(largest_below_power(10, &Ratio::new(1, 2)), 3);
        assert_eq!(largest_below_power(1, &e), 0);
    }

    #[test]
    fn rational_strings_round_trip() {
        let r = ratio(-6, 4);
        assert_eq!(rational_string(&r), "-3/2");
        assert_eq!(parse_rational("-3/2").unwrap(), r);
        assert_eq!(parse_rational("7").unwrap(), int(7));
        assert!(parse_rational("1/0").is_err());
        assert_eq!(display_decimal(&ratio(385, 256), 4), "1.5039");
        assert_eq!(floor_log2(&ratio(1, 1024)), Some(-10));
        assert_eq!(floor_log2(&ratio(3, 1)), Some(1));
    }
}
