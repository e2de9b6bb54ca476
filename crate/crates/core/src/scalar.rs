//! Scalar kinds shared by the exact and floating-point geometry paths.

use std::fmt::Debug;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

/// Arbitrary-precision rational used wherever identities must hold exactly.
pub type Rational = BigRational;

/// Absolute containment tolerance for float geometry.
pub const TAU_GEOM: f64 = 1e-12;

/// Polygons whose area falls below this are treated as empty.
pub const MIN_POLYGON_AREA: f64 = 1e-18;

/// Coordinate field used by the geometry kernel: either exact rationals or `f64`.
pub trait Scalar: Clone + Debug + PartialOrd + Num + Signed + Send + Sync + 'static {
    /// Exact conversion for rationals (every finite `f64` is dyadic).
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn ratio(num: i64, den: i64) -> Self;
    /// Slack allowed in predicates; zero for exact arithmetic.
    fn tolerance() -> Self;
    fn is_exact() -> bool;

    fn int(v: i64) -> Self {
        Self::ratio(v, 1)
    }

    fn half() -> Self {
        Self::ratio(1, 2)
    }

    fn max_of(a: Self, b: Self) -> Self {
        if a >= b {
            a
        } else {
            b
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if a <= b {
            a
        } else {
            b
        }
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn tolerance() -> Self {
        TAU_GEOM
    }

    fn is_exact() -> bool {
        false
    }
}

impl Scalar for Rational {
    fn from_f64(v: f64) -> Self {
        BigRational::from_float(v).expect("finite f64")
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| {
            // Fall back to integer division for values whose parts overflow f64.
            let n = self.numer().to_f64().unwrap_or(f64::NAN);
            let d = self.denom().to_f64().unwrap_or(f64::NAN);
            n / d
        })
    }

    fn ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn tolerance() -> Self {
        Self::zero()
    }

    fn is_exact() -> bool {
        true
    }
}

/// Builds a rational from an `i64` numerator and denominator.
pub fn q(num: i64, den: i64) -> Rational {
    Rational::ratio(num, den)
}

/// Formats a rational as `"p/q"`, or `"p"` when the denominator is one.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("cannot parse rational from {0:?}")]
pub struct ParseRationalError(pub String);

/// Parses `"p/q"`, `"p"`, or a decimal literal such as `"0.25"` exactly.
pub fn parse_rational(s: &str) -> Result<Rational, ParseRationalError> {
    let t = s.trim();
    let err = || ParseRationalError(s.to_string());
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| err())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Ok(n) = BigInt::from_str(t) {
        return Ok(BigRational::from_integer(n));
    }
    let (int_part, frac) = t.split_once('.').ok_or_else(err)?;
    let neg = int_part.starts_with('-');
    let digits = format!("{}{}", int_part.trim_start_matches(['-', '+']), frac);
    let n = BigInt::from_str(&digits).map_err(|_| err())?;
    let d = num_traits::pow(BigInt::from(10u32), frac.len());
    let r = BigRational::new(n, d);
    Ok(if neg { -r } else { r })
}

/// Exact rational from an `f64`, for callers that only hold `FromPrimitive`.
pub fn rational_from_f64(v: f64) -> Option<Rational> {
    <BigRational as FromPrimitive>::from_f64(v)
}
