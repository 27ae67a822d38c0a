//! Exact dyadic rationals `num / 2^exp`.
//!
//! Every state produced by the approximate-consensus protocols is a finite
//! sequence of two-term averages of dyadic inputs, so it stays exactly
//! representable here. Convergence properties are checked with exact
//! comparisons; nothing in this module rounds.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A dyadic rational in canonical form: the numerator is odd or the
/// exponent is zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: BigInt,
    exp: u32,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ParseDyadicError {
    #[error("malformed dyadic literal `{0}`")]
    Malformed(String),
    #[error("`{0}` is not a dyadic rational")]
    NotDyadic(String),
}

impl Dyadic {
    pub fn new(num: impl Into<BigInt>, exp: u32) -> Self {
        let mut d = Dyadic { num: num.into(), exp };
        d.normalize();
        d
    }

    pub fn zero() -> Self {
        Dyadic { num: BigInt::zero(), exp: 0 }
    }

    pub fn one() -> Self {
        Dyadic { num: BigInt::one(), exp: 0 }
    }

    pub fn from_int(v: i64) -> Self {
        Dyadic { num: BigInt::from(v), exp: 0 }
    }

    /// `2^-k`.
    pub fn pow2_neg(k: u32) -> Self {
        Dyadic { num: BigInt::one(), exp: k }
    }

    pub fn numerator(&self) -> &BigInt {
        &self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    fn normalize(&mut self) {
        if self.num.is_zero() {
            self.exp = 0;
            return;
        }
        if self.exp == 0 {
            return;
        }
        let tz = self.num.trailing_zeros().unwrap_or(0);
        let shift = tz.min(u64::from(self.exp)) as u32;
        if shift > 0 {
            self.num >>= shift as usize;
            self.exp -= shift;
        }
    }

    /// Numerators of `self` and `other` scaled to a common exponent.
    fn aligned(&self, other: &Dyadic) -> (BigInt, BigInt, u32) {
        match self.exp.cmp(&other.exp) {
            Ordering::Equal => (self.num.clone(), other.num.clone(), self.exp),
            Ordering::Less => (
                &self.num << (other.exp - self.exp) as usize,
                other.num.clone(),
                other.exp,
            ),
            Ordering::Greater => (
                self.num.clone(),
                &other.num << (self.exp - other.exp) as usize,
                self.exp,
            ),
        }
    }

    pub fn half(&self) -> Dyadic {
        Dyadic::new(self.num.clone(), self.exp + 1)
    }

    /// `(a + b) / 2`, the only update rule the averaging protocols use.
    pub fn midpoint(a: &Dyadic, b: &Dyadic) -> Dyadic {
        let (x, y, e) = a.aligned(b);
        Dyadic::new(x + y, e + 1)
    }

    pub fn abs(&self) -> Dyadic {
        Dyadic { num: self.num.abs(), exp: self.exp }
    }

    pub fn pow(&self, k: u32) -> Dyadic {
        Dyadic::new(num_traits::pow(self.num.clone(), k as usize), self.exp * k)
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.num.clone(), BigInt::one() << self.exp as usize)
    }

    /// Exact conversion; fails when the denominator is not a power of two.
    pub fn from_rational(r: &BigRational) -> Option<Dyadic> {
        let den = r.denom();
        if den.is_zero() || !(den.is_positive()) {
            return None;
        }
        let tz = den.trailing_zeros().unwrap_or(0);
        if (den >> tz as usize) != BigInt::one() {
            return None;
        }
        Some(Dyadic::new(r.numer().clone(), tz as u32))
    }

    /// Nearest double; for display and CSV only.
    pub fn to_f64(&self) -> f64 {
        let n = self.num.to_f64().unwrap_or(f64::NAN);
        if self.exp <= 1000 {
            n / 2f64.powi(self.exp as i32)
        } else {
            let r = self.to_rational();
            r.to_f64().unwrap_or(0.0)
        }
    }

    /// Decimal rendering with a fixed number of fractional digits.
    pub fn to_decimal(&self, digits: usize) -> String {
        format!("{:.*}", digits, self.to_f64())
    }

    /// Largest dyadic with exponent `exp` that is `<= x` (used to turn
    /// sampled floats into exact inputs).
    pub fn floor_from_f64(x: f64, exp: u32) -> Dyadic {
        let scaled = (x * 2f64.powi(exp as i32)).floor();
        Dyadic::new(BigInt::from(scaled as i128), exp)
    }
}

impl Default for Dyadic {
    fn default() -> Self {
        Dyadic::zero()
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.exp == other.exp {
            return self.num.cmp(&other.num);
        }
        // Signs decide most comparisons without shifting.
        match (self.num.sign(), other.num.sign()) {
            (a, b) if a != b => return a.cmp(&b),
            _ => {}
        }
        let (x, y, _) = self.aligned(other);
        x.cmp(&y)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        let (x, y, e) = self.aligned(rhs);
        Dyadic::new(x + y, e)
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        &self + &rhs
    }
}

impl Sub for &Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        let (x, y, e) = self.aligned(rhs);
        Dyadic::new(x - y, e)
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        &self - &rhs
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::new(&self.num * &rhs.num, self.exp + rhs.exp)
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: Dyadic) -> Dyadic {
        &self * &rhs
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { num: -self.num, exp: self.exp }
    }
}

impl From<i64> for Dyadic {
    fn from(v: i64) -> Self {
        Dyadic::from_int(v)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/2^{}", self.num, self.exp)
        }
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Dyadic {
    type Err = ParseDyadicError;

    /// Accepts `num`, `num/2^exp`, `num/den` with a power-of-two `den`, and
    /// finite decimal literals whose value is dyadic (e.g. `0.25`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || ParseDyadicError::Malformed(s.to_string());
        if let Some((n, d)) = s.split_once('/') {
            let num: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d = d.trim();
            if let Some(e) = d.strip_prefix("2^") {
                let exp: u32 = e.parse().map_err(|_| bad())?;
                return Ok(Dyadic::new(num, exp));
            }
            let den: BigInt = d.parse().map_err(|_| bad())?;
            if den.is_zero() {
                return Err(bad());
            }
            return Dyadic::from_rational(&BigRational::new(num, den))
                .ok_or_else(|| ParseDyadicError::NotDyadic(s.to_string()));
        }
        if let Some((int, frac)) = s.split_once('.') {
            let neg = int.starts_with('-');
            let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
            let mag: BigInt = digits.parse().map_err(|_| bad())?;
            let den = num_traits::pow(BigInt::from(10), frac.len());
            let num = if neg { -mag } else { mag };
            return Dyadic::from_rational(&BigRational::new(num, den))
                .ok_or_else(|| ParseDyadicError::NotDyadic(s.to_string()));
        }
        let num: BigInt = s.parse().map_err(|_| bad())?;
        Ok(Dyadic::new(num, 0))
    }
}

impl Serialize for Dyadic {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Dyadic {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Minimum and maximum of a non-empty collection.
pub fn range_of<'a, I>(values: I) -> Option<(Dyadic, Dyadic)>
where
    I: IntoIterator<Item = &'a Dyadic>,
{
    let mut it = values.into_iter();
    let first = it.next()?;
    let (mut lo, mut hi) = (first, first);
    for v in it {
        if v < lo {
            lo = v;
        }
        if v > hi {
            hi = v;
        }
    }
    Some((lo.clone(), hi.clone()))
}

/// `(1 - 2^-n)^p` as an exact dyadic.
pub fn contraction_factor(n: u32, p: u32) -> Dyadic {
    let one_minus = &Dyadic::one() - &Dyadic::pow2_neg(n);
    one_minus.pow(p)
}

/// Exact comparison of a dyadic against an arbitrary rational.
pub fn le_rational(d: &Dyadic, r: &BigRational) -> bool {
    d.to_rational() <= *r
}
