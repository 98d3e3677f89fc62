//! Exact scalars and floating-point enclosures.
//!
//! Cube geometry lives in `Rational` (arbitrary precision). Normalization
//! factors of the form `2^(h/2)` are carried symbolically by [`ScaledRational`]
//! so Gram entries stay exact even when the scale is irrational.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize, Serializer};

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `2^e` for any signed exponent.
pub fn pow2(e: i64) -> Rational {
    let p = BigInt::one() << e.unsigned_abs();
    if e >= 0 {
        Rational::from_integer(p)
    } else {
        Rational::new(BigInt::one(), p)
    }
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        // numerator/denominator overflow f64 individually; scale down first
        let n = q.numer().bits() as i64;
        let d = q.denom().bits() as i64;
        let shift = (n - d).clamp(-1000, 1000);
        let scaled = q / pow2(shift);
        scaled.to_f64().unwrap_or(f64::NAN) * 2f64.powi(shift as i32)
    })
}

/// Renders a rational as `"p/q"` (or `"p"` for integers).
pub fn rat_string(q: &Rational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn serialize_rat<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&rat_string(q))
}

pub fn serialize_rat_vec<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for q in v {
        seq.serialize_element(&rat_string(q))?;
    }
    seq.end()
}

/// `base * 2^(half_power / 2)`, closed under multiplication.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaledRational {
    pub base: Rational,
    pub half_power: i64,
}

impl ScaledRational {
    pub fn new(base: Rational, half_power: i64) -> Self {
        let mut s = Self { base, half_power };
        s.normalize();
        s
    }

    pub fn zero() -> Self {
        Self { base: Rational::zero(), half_power: 0 }
    }

    fn normalize(&mut self) {
        if self.base.is_zero() {
            self.half_power = 0;
            return;
        }
        // fold even powers into the rational part; keep half_power in {0, 1}
        let whole = self.half_power.div_euclid(2);
        let rem = self.half_power.rem_euclid(2);
        if whole != 0 {
            self.base = &self.base * pow2(whole);
        }
        self.half_power = rem;
    }

    /// Exact rational value, when the irrational factor cancels.
    pub fn as_rational(&self) -> Option<&Rational> {
        (self.half_power == 0).then_some(&self.base)
    }

    pub fn is_zero(&self) -> bool {
        self.base.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.base.is_positive()
    }

    pub fn to_f64(&self) -> f64 {
        let b = to_f64(&self.base);
        if self.half_power == 1 {
            b * std::f64::consts::SQRT_2
        } else {
            b
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::new(&self.base * &other.base, self.half_power + other.half_power)
    }
}

impl fmt::Display for ScaledRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.half_power == 0 || self.base.is_zero() {
            write!(f, "{}", rat_string(&self.base))
        } else {
            write!(f, "{}*sqrt(2)", rat_string(&self.base))
        }
    }
}

impl Serialize for ScaledRational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Closed interval `[lo, hi]` of reals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Enclosure {
    pub lo: f64,
    pub hi: f64,
}

impl Enclosure {
    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn around(center: f64, radius: f64) -> Self {
        let r = radius.abs();
        Self { lo: center - r, hi: center + r }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn radius(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { lo: self.lo + o.lo, hi: self.hi + o.hi }
    }

    pub fn scale(&self, s: f64) -> Self {
        if s >= 0.0 {
            Self { lo: self.lo * s, hi: self.hi * s }
        } else {
            Self { lo: self.hi * s, hi: self.lo * s }
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let c = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { lo, hi }
    }

    pub fn widen(&self, r: f64) -> Self {
        Self { lo: self.lo - r.abs(), hi: self.hi + r.abs() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_rational_folds_even_powers() {
        let s = ScaledRational::new(rat(1, 2), 3);
        assert_eq!(s.base, rat(1, 1));
        assert_eq!(s.half_power, 1);
        let t = s.mul(&ScaledRational::new(rat(1, 1), 1));
        assert_eq!(t.as_rational(), Some(&rat(2, 1)));
    }

    #[test]
    fn pow2_negative() {
        assert_eq!(pow2(-3), rat(1, 8));
        assert_eq!(pow2(0), rat(1, 1));
    }

    #[test]
    fn enclosure_mul_sign_cases() {
        let a = Enclosure { lo: -1.0, hi: 2.0 };
        let b = Enclosure { lo: -3.0, hi: 1.0 };
        let p = a.mul(&b);
        assert_eq!(p.lo, -6.0);
        assert_eq!(p.hi, 3.0);
    }

    #[test]
    fn huge_rational_to_f64() {
        let q = pow2(1100) / pow2(1090);
        assert_eq!(to_f64(&q), 1024.0);
    }
}
