//! Exact rational helpers and certified enclosures for the few irrational
//! quantities (p-th powers and roots) the rate formulas need.

use alloc::format;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::{Error, Result};

/// Arbitrary-precision rational number.
pub type Rat = BigRational;

/// Enclosure width used for irrational values is `2^-PRECISION_BITS`.
pub const PRECISION_BITS: u32 = 64;

pub fn rat(numer: i64, denom: i64) -> Rat {
    Rat::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(n: u64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// `2^k` for any integer exponent.
pub fn pow2(k: i64) -> Rat {
    let m = BigInt::one() << k.unsigned_abs();
    if k >= 0 {
        Rat::from_integer(m)
    } else {
        Rat::new(BigInt::one(), m)
    }
}

/// Parses `"p/q"`, `"-p/q"` or a plain integer.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let bad = || Error::invalid(format!("not a rational literal: {s:?}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
            let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(Rat::new(p, q))
        }
        None => BigInt::from_str(s).map(Rat::from_integer).map_err(|_| bad()),
    }
}

pub fn ceil_u64(x: &Rat) -> Result<u64> {
    if x.is_negative() {
        return Ok(0);
    }
    x.ceil().to_integer().to_u64().ok_or(Error::Overflow("ceiling"))
}

pub fn floor_u64(x: &Rat) -> Result<u64> {
    if x.is_negative() {
        return Ok(0);
    }
    x.floor().to_integer().to_u64().ok_or(Error::Overflow("floor"))
}

/// Least `k >= 0` with `2^k * eps >= 1`, i.e. `max(0, ceil(log2(1/eps)))`.
pub fn ceil_log2_recip(eps: &Rat) -> u64 {
    debug_assert!(eps.is_positive());
    let one = Rat::one();
    if *eps >= one {
        return 0;
    }
    // 2^k >= q/p  <=>  k >= bits needed; start from a bit-length estimate and fix up.
    let q_over_p = eps.recip();
    let mut k = q_over_p.to_integer().bits().saturating_sub(1);
    while pow2(k as i64) < q_over_p {
        k += 1;
    }
    k
}

/// Closed interval `[lo, hi]` with rational endpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: Rat,
    pub hi: Rat,
}

impl Interval {
    pub fn exact(x: Rat) -> Self {
        Interval { lo: x.clone(), hi: x }
    }

    pub fn new(lo: Rat, hi: Rat) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn as_exact(&self) -> Option<&Rat> {
        self.is_exact().then_some(&self.lo)
    }

    pub fn width(&self) -> Rat {
        &self.hi - &self.lo
    }

    pub fn add(&self, other: &Interval) -> Interval {
        Interval::new(&self.lo + &other.lo, &self.hi + &other.hi)
    }

    /// Product of two intervals contained in `[0, inf)`.
    pub fn mul_nonneg(&self, other: &Interval) -> Interval {
        Interval::new(&self.lo * &other.lo, &self.hi * &other.hi)
    }

    pub fn scale_nonneg(&self, c: &Rat) -> Interval {
        Interval::new(&self.lo * c, &self.hi * c)
    }

    pub fn contains(&self, x: &Rat) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn certainly_lt(&self, x: &Rat) -> bool {
        &self.hi < x
    }

    pub fn certainly_le(&self, x: &Rat) -> bool {
        &self.hi <= x
    }

    pub fn certainly_ge(&self, x: &Rat) -> bool {
        &self.lo >= x
    }

    pub fn certainly_gt(&self, x: &Rat) -> bool {
        &self.lo > x
    }

    /// Ordering against `x` when the enclosure decides it.
    pub fn cmp_rat(&self, x: &Rat) -> Option<Ordering> {
        if self.certainly_lt(x) {
            Some(Ordering::Less)
        } else if self.certainly_gt(x) {
            Some(Ordering::Greater)
        } else if self.is_exact() {
            Some(Ordering::Equal)
        } else {
            None
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_exact() {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "[{}, {}]", self.lo, self.hi)
        }
    }
}

fn exact_root_uint(n: &BigUint, k: u32) -> Option<BigUint> {
    let r = n.nth_root(k);
    (r.pow(k) == *n).then_some(r)
}

/// `x^(1/k)` when it is rational.
pub fn exact_root(x: &Rat, k: u32) -> Option<Rat> {
    if x.is_negative() || k == 0 {
        return None;
    }
    let n = exact_root_uint(x.numer().magnitude(), k)?;
    let d = exact_root_uint(x.denom().magnitude(), k)?;
    Some(Rat::new(BigInt::from(n), BigInt::from(d)))
}

/// Enclosure of `x^(1/k)` for `x >= 0`, exact when the root is rational and of
/// width `2^-PRECISION_BITS` otherwise.
pub fn root_enclosure(x: &Rat, k: u32) -> Interval {
    debug_assert!(!x.is_negative() && k > 0);
    if let Some(r) = exact_root(x, k) {
        return Interval::exact(r);
    }
    let shift = (k * PRECISION_BITS) as usize;
    let scaled = (x.numer().magnitude() << shift).div_floor(x.denom().magnitude());
    let r = scaled.nth_root(k);
    let unit = BigInt::one() << PRECISION_BITS as usize;
    let lo = Rat::new(BigInt::from_biguint(Sign::Plus, r.clone()), unit.clone());
    let hi = Rat::new(BigInt::from_biguint(Sign::Plus, r + 1u32), unit);
    Interval::new(lo, hi)
}

/// Enclosure of `x^p` for `x >= 0` and rational `p > 0`.
pub fn pow_enclosure(x: &Rat, p: &Rat) -> Result<Interval> {
    if x.is_negative() || !p.is_positive() {
        return Err(Error::invalid("pow_enclosure needs x >= 0 and p > 0"));
    }
    let a = p.numer().to_u32().ok_or(Error::Overflow("exponent numerator"))?;
    let b = p.denom().to_u32().ok_or(Error::Overflow("exponent denominator"))?;
    let xa = num_traits::pow(x.clone(), a as usize);
    Ok(if b == 1 { Interval::exact(xa) } else { root_enclosure(&xa, b) })
}

/// Integer power for small natural exponents.
pub fn powu(x: &Rat, e: u32) -> Rat {
    num_traits::pow(x.clone(), e as usize)
}

/// Exponent as a small natural number, when it is one.
pub fn as_small_natural(p: &Rat) -> Option<u32> {
    if p.is_integer() && !p.is_negative() {
        p.to_integer().to_u32()
    } else {
        None
    }
}
