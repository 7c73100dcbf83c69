//! Exact rational exponents of ε, extended with +∞ for the valuation of zero.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_integer::Integer;
use num_rational::Ratio;
use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{AseError, Result};

/// A reduced fraction `num/den` with `den >= 1`, or `PLUS_INFINITY`.
///
/// Variant order makes every finite value compare below infinity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Exponent {
    Finite(Ratio<i64>),
    PlusInfinity,
}

impl Exponent {
    pub const PLUS_INFINITY: Exponent = Exponent::PlusInfinity;
    pub const ZERO: Exponent = Exponent::Finite(Ratio::new_raw(0, 1));
    pub const ONE: Exponent = Exponent::Finite(Ratio::new_raw(1, 1));

    pub fn int(v: i64) -> Self {
        Exponent::Finite(Ratio::from_integer(v))
    }

    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(AseError::InvalidExponent(format!("{num}/0")));
        }
        Ok(Exponent::Finite(Ratio::new(num, den)))
    }

    /// Panicking shorthand for literals known to be valid.
    pub fn frac(num: i64, den: i64) -> Self {
        Self::new(num, den).expect("nonzero denominator")
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Exponent::Finite(_))
    }

    pub fn ratio(&self) -> Option<Ratio<i64>> {
        match self {
            Exponent::Finite(r) => Some(*r),
            Exponent::PlusInfinity => None,
        }
    }

    pub fn num(&self) -> Option<i64> {
        self.ratio().map(|r| *r.numer())
    }

    pub fn den(&self) -> Option<i64> {
        self.ratio().map(|r| *r.denom())
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Exponent::Finite(r) => *r.numer() as f64 / *r.denom() as f64,
            Exponent::PlusInfinity => f64::INFINITY,
        }
    }

    pub fn half(&self) -> Self {
        match self {
            Exponent::Finite(r) => Exponent::Finite(r / 2),
            Exponent::PlusInfinity => Exponent::PlusInfinity,
        }
    }

    pub fn times(&self, k: i64) -> Self {
        match self {
            Exponent::Finite(r) => Exponent::Finite(r * k),
            Exponent::PlusInfinity => Exponent::PlusInfinity,
        }
    }

    /// `self - other`, with `∞ - finite = ∞`. Subtracting infinity is a logic error.
    pub fn checked_sub(&self, other: &Exponent) -> Option<Exponent> {
        match (self, other) {
            (Exponent::Finite(a), Exponent::Finite(b)) => Some(Exponent::Finite(a - b)),
            (Exponent::PlusInfinity, Exponent::Finite(_)) => Some(Exponent::PlusInfinity),
            (_, Exponent::PlusInfinity) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        *self == Exponent::ZERO
    }

    pub fn is_negative(&self) -> bool {
        *self < Exponent::ZERO
    }

    /// Evaluate ε^self for ε > 0.
    pub fn pow(&self, eps: f64) -> f64 {
        match self {
            Exponent::PlusInfinity => 0.0,
            Exponent::Finite(r) => {
                if r.is_integer() {
                    let k = *r.numer();
                    if k.unsigned_abs() <= i32::MAX as u64 {
                        return eps.powi(k as i32);
                    }
                }
                eps.powf(self.to_f64())
            }
        }
    }
}

impl Default for Exponent {
    fn default() -> Self {
        Exponent::ZERO
    }
}

impl From<i64> for Exponent {
    fn from(v: i64) -> Self {
        Exponent::int(v)
    }
}

impl Add for Exponent {
    type Output = Exponent;
    fn add(self, rhs: Exponent) -> Exponent {
        match (self, rhs) {
            (Exponent::Finite(a), Exponent::Finite(b)) => Exponent::Finite(a + b),
            _ => Exponent::PlusInfinity,
        }
    }
}

impl Sub for Exponent {
    type Output = Exponent;
    fn sub(self, rhs: Exponent) -> Exponent {
        self.checked_sub(&rhs).expect("cannot subtract an infinite exponent")
    }
}

impl Neg for Exponent {
    type Output = Exponent;
    fn neg(self) -> Exponent {
        match self {
            Exponent::Finite(r) => Exponent::Finite(-r),
            Exponent::PlusInfinity => panic!("cannot negate an infinite exponent"),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::PlusInfinity => write!(f, "inf"),
            Exponent::Finite(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Exponent::Finite(r) => write!(f, "{}/{}", r.numer(), r.denom()),
        }
    }
}

/// Least common multiple of the denominators of the finite exponents.
pub fn lcm_denominators<'a>(items: impl IntoIterator<Item = &'a Exponent>) -> i64 {
    items
        .into_iter()
        .filter_map(|e| e.den())
        .fold(1i64, |acc, d| acc.lcm(&d))
}

pub fn min_exp(a: Exponent, b: Exponent) -> Exponent {
    match a.cmp(&b) {
        Ordering::Greater => b,
        _ => a,
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::PlusInfinity => serializer.serialize_str("inf"),
            Exponent::Finite(r) => {
                let mut map = serializer.serialize_map(Some(2))?;
                map.serialize_entry("num", r.numer())?;
                map.serialize_entry("den", r.denom())?;
                map.end()
            }
        }
    }
}

struct ExponentVisitor;

impl<'de> Visitor<'de> for ExponentVisitor {
    type Value = Exponent;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "an integer, {{\"num\":N,\"den\":D}}, or \"inf\"")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Exponent, E> {
        Ok(Exponent::int(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Exponent, E> {
        i64::try_from(v)
            .map(Exponent::int)
            .map_err(|_| E::custom("exponent out of range"))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Exponent, E> {
        if v.fract() == 0.0 && v.abs() < 9.0e15 {
            Ok(Exponent::int(v as i64))
        } else {
            Err(E::custom("fractional exponents must be given as {\"num\",\"den\"}"))
        }
    }

    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Exponent, E> {
        match v {
            "inf" | "+inf" | "infinity" => Ok(Exponent::PlusInfinity),
            _ => Err(E::custom(format!("unrecognised exponent string {v:?}"))),
        }
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Exponent, A::Error> {
        let mut num: Option<i64> = None;
        let mut den: Option<i64> = None;
        while let Some(key) = map.next_key::<String>()? {
            match key.as_str() {
                "num" => num = Some(map.next_value()?),
                "den" => den = Some(map.next_value()?),
                other => return Err(de::Error::unknown_field(other, &["num", "den"])),
            }
        }
        let num = num.ok_or_else(|| de::Error::missing_field("num"))?;
        let den = den.unwrap_or(1);
        if den <= 0 {
            return Err(de::Error::custom("den must be a positive integer"));
        }
        Ok(Exponent::Finite(Ratio::new(num, den)))
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Exponent, D::Error> {
        deserializer.deserialize_any(ExponentVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduced_and_ordered() {
        let a = Exponent::frac(2, 4);
        assert_eq!(a, Exponent::frac(1, 2));
        assert_eq!(a.den(), Some(2));
        assert!(Exponent::frac(1, 2) < Exponent::ONE);
        assert!(Exponent::int(1_000_000) < Exponent::PLUS_INFINITY);
        assert_eq!(Exponent::frac(-3, -6), Exponent::frac(1, 2));
        assert!(Exponent::new(1, 0).is_err());
    }

    #[test]
    fn infinity_absorbs() {
        assert_eq!(Exponent::int(3) + Exponent::PLUS_INFINITY, Exponent::PLUS_INFINITY);
        assert_eq!(Exponent::PLUS_INFINITY - Exponent::int(3), Exponent::PLUS_INFINITY);
        assert_eq!(Exponent::int(2).checked_sub(&Exponent::PLUS_INFINITY), None);
    }

    #[test]
    fn json_forms() {
        let e: Exponent = serde_json::from_str("3").unwrap();
        assert_eq!(e, Exponent::int(3));
        let e: Exponent = serde_json::from_str(r#"{"num":3,"den":2}"#).unwrap();
        assert_eq!(e, Exponent::frac(3, 2));
        assert_eq!(serde_json::to_string(&e).unwrap(), r#"{"num":3,"den":2}"#);
        assert!(serde_json::from_str::<Exponent>(r#"{"num":3,"den":0}"#).is_err());
        assert!(serde_json::from_str::<Exponent>("1.5").is_err());
    }

    #[test]
    fn pow_matches_real_power() {
        assert_eq!(Exponent::int(2).pow(0.5), 0.25);
        assert!((Exponent::frac(1, 2).pow(0.25) - 0.5).abs() < 1e-15);
        assert_eq!(Exponent::PLUS_INFINITY.pow(0.5), 0.0);
    }
}
