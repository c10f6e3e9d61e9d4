//! Numeric scalars used for coordinates, weights and probabilities.
//!
//! Two arithmetic paths share every algorithm: `f64` for desk-scale grids and
//! [`Rational`] for exact reproduction of small worked examples.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Num, Signed, ToPrimitive};

use crate::error::{Error, Result};

/// Exact rational number.
pub type Rational = Ratio<i128>;

/// Tolerance used on every floating-point comparison.
pub const FLOAT_TOLERANCE: f64 = 1e-9;

pub trait Scalar:
    Num + Signed + Clone + Debug + Display + PartialOrd + Send + Sync + Sum + 'static
{
    /// True when arithmetic is exact and comparisons need no tolerance.
    const EXACT: bool;

    fn from_rational(r: &Rational) -> Self;

    /// Picks the cheapest representation of a coordinate that is known both
    /// exactly and as an already-rounded float.
    fn from_coordinate(exact: &Rational, approx: f64) -> Self;

    fn from_count(n: usize) -> Self;

    fn to_f64(&self) -> f64;

    /// Exact conversion to a rational, where one exists.
    fn to_rational(&self) -> Option<Rational>;

    /// Equality for exact scalars, `|a - b| <= tol` otherwise.
    fn close_to(&self, other: &Self, tol: f64) -> bool;

    fn is_one_within(&self, tol: f64) -> bool {
        self.close_to(&Self::one(), tol)
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }

    fn from_coordinate(_exact: &Rational, approx: f64) -> Self {
        approx
    }

    fn from_count(n: usize) -> Self {
        n as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn to_rational(&self) -> Option<Rational> {
        rational_from_f64(*self).ok()
    }

    fn close_to(&self, other: &Self, tol: f64) -> bool {
        (self - other).abs() <= tol
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_rational(r: &Rational) -> Self {
        *r
    }

    fn from_coordinate(exact: &Rational, _approx: f64) -> Self {
        *exact
    }

    fn from_count(n: usize) -> Self {
        Rational::from_integer(n as i128)
    }

    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }

    fn to_rational(&self) -> Option<Rational> {
        Some(*self)
    }

    fn close_to(&self, other: &Self, _tol: f64) -> bool {
        self == other
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    ToPrimitive::to_f64(r).unwrap_or_else(|| *r.numer() as f64 / *r.denom() as f64)
}

/// Parses a decimal literal such as `-3`, `0.01` or `2.5e-3`, or a fraction
/// `n/d`, exactly.
pub fn parse_decimal(text: &str) -> Result<Rational> {
    let bad = || Error::parse(text.to_string(), "not a decimal number");
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|_| bad())?;
        let d: i128 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (
            &text[..pos],
            text[pos + 1..].parse::<i32>().map_err(|_| bad())?,
        ),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut numer: i128 = 0;
    for c in all_digits.chars() {
        numer = numer
            .checked_mul(10)
            .and_then(|n| n.checked_add(i128::from(c as u8 - b'0')))
            .ok_or_else(|| Error::Inexact(format!("{text} overflows the rational range")))?;
    }
    let scale = exponent - frac_part.len() as i32;
    let pow = |e: u32| {
        10i128
            .checked_pow(e)
            .ok_or_else(|| Error::Inexact(format!("{text} overflows the rational range")))
    };
    let mut value = if scale >= 0 {
        Rational::from_integer(
            numer
                .checked_mul(pow(scale as u32)?)
                .ok_or_else(|| Error::Inexact(format!("{text} overflows the rational range")))?,
        )
    } else {
        Rational::new(numer, pow((-scale) as u32)?)
    };
    if negative {
        value = -value;
    }
    Ok(value)
}

/// Converts a float to the rational named by its shortest round-trip decimal
/// representation, so `0.1` becomes exactly `1/10`.
pub fn rational_from_f64(x: f64) -> Result<Rational> {
    if !x.is_finite() {
        return Err(Error::Inexact(format!("{x} is not finite")));
    }
    parse_decimal(&format!("{x}"))
}

/// A rational read from a JSON number or decimal string, for exact configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Decimal(pub Rational);

impl<'de> serde::Deserialize<'de> for Decimal {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Float(f64),
            Text(String),
        }
        let value = match Raw::deserialize(deserializer)? {
            Raw::Int(i) => Ok(Rational::from_integer(i128::from(i))),
            Raw::Float(x) => rational_from_f64(x),
            Raw::Text(t) => parse_decimal(&t),
        };
        value.map(Decimal).map_err(serde::de::Error::custom)
    }
}

impl serde::Serialize for Decimal {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            serializer.serialize_i128(self.0.to_integer())
        } else {
            serializer.serialize_str(&format_decimal(&self.0))
        }
    }
}

/// Renders a rational as a terminating decimal when it has one, `n/d` otherwise.
pub fn format_decimal(r: &Rational) -> String {
    let mut d = *r.denom();
    let mut scale = 0u32;
    while d % 10 == 0 {
        d /= 10;
        scale += 1;
    }
    let (mut twos, mut fives) = (0u32, 0u32);
    while d % 2 == 0 {
        d /= 2;
        twos += 1;
    }
    while d % 5 == 0 {
        d /= 5;
        fives += 1;
    }
    if d != 1 {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let digits = scale + twos.max(fives);
    let scaled = r * Rational::from_integer(10i128.pow(digits));
    let n = scaled.to_integer();
    if digits == 0 {
        return n.to_string();
    }
    let sign = if n < 0 { "-" } else { "" };
    let abs = n.unsigned_abs().to_string();
    let width = digits as usize + 1;
    let padded = format!("{abs:0>width$}");
    let (int, frac) = padded.split_at(padded.len() - digits as usize);
    format!("{sign}{int}.{frac}")
}

/// Decimal rendering with at least 15 significant digits.
pub fn format_probability(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Rounds to 15 decimal places; used for report emission.
pub fn round_fixed(x: f64) -> f64 {
    let r = (x * 1e15).round() / 1e15;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_parse_exactly() {
        assert_eq!(parse_decimal("0.01").unwrap(), Rational::new(1, 100));
        assert_eq!(parse_decimal("-3").unwrap(), Rational::from_integer(-3));
        assert_eq!(parse_decimal("2.5e-3").unwrap(), Rational::new(1, 400));
        assert_eq!(parse_decimal("1e2").unwrap(), Rational::from_integer(100));
        assert_eq!(parse_decimal(".5").unwrap(), Rational::new(1, 2));
        assert!(parse_decimal("abc").is_err());
        assert!(parse_decimal("").is_err());
        assert!(parse_decimal("1.2.3").is_err());
    }

    #[test]
    fn floats_map_to_their_shortest_decimal() {
        assert_eq!(rational_from_f64(0.1).unwrap(), Rational::new(1, 10));
        assert_eq!(rational_from_f64(-0.5).unwrap(), Rational::new(-1, 2));
        assert_eq!(
            rational_from_f64(1e-7).unwrap(),
            Rational::new(1, 10_000_000)
        );
        assert!(rational_from_f64(f64::NAN).is_err());
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(format_decimal(&Rational::new(1, 100)), "0.01");
        assert_eq!(format_decimal(&Rational::new(-7, 2)), "-3.5");
        assert_eq!(format_decimal(&Rational::new(4, 7)), "4/7");
        assert_eq!(format_decimal(&Rational::from_integer(12)), "12");
        assert_eq!(format_decimal(&Rational::new(3, 8)), "0.375");
        let d: Decimal = serde_json::from_str("0.01").unwrap();
        assert_eq!(d.0, Rational::new(1, 100));
        let d: Decimal = serde_json::from_str("\"-1/2\"").unwrap();
        assert_eq!(d.0, Rational::new(-1, 2));
        let d: Decimal = serde_json::from_str("-3").unwrap();
        assert_eq!(d.0, Rational::from_integer(-3));
    }

    #[test]
    fn probability_format_keeps_fifteen_digits() {
        let s = format_probability(4.0 / 7.0);
        let back: f64 = s.parse().unwrap();
        assert_eq!(back, 4.0 / 7.0);
        assert_eq!(format_probability(0.0), "0");
    }
}
