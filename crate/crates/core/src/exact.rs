//! Exact rational arithmetic and membership in unions of arithmetic progressions.
//!
//! Values are arbitrary precision, so exponents like `p/q` with large `q` never
//! overflow. The numeric companion [`ArithmeticSet::contains_numeric`] tests a
//! complex number against the same sets with an explicit tolerance.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExactError {
    #[error("malformed rational {0:?}: expected \"p/q\" or \"p\"")]
    MalformedRational(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
    #[error("malformed decimal {0:?}")]
    MalformedDecimal(String),
}

/// An exact fraction, always in lowest terms with a positive denominator.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        Rational(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn from_integer(n: i64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_big(numer: BigInt, denom: BigInt) -> Self {
        assert!(!denom.is_zero(), "zero denominator");
        Rational(BigRational::new(numer, denom))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    pub fn recip(&self) -> Self {
        Rational(self.0.recip())
    }

    pub fn square(&self) -> Self {
        Rational(&self.0 * &self.0)
    }

    pub fn floor(&self) -> Self {
        Rational(self.0.floor())
    }

    pub fn to_f64(&self) -> f64 {
        // Divide in big integers first so huge numerators and denominators
        // do not overflow to inf/inf.
        self.0.to_f64().unwrap_or_else(|| {
            let n = self.numer().to_f64().unwrap_or(f64::NAN);
            let d = self.denom().to_f64().unwrap_or(f64::NAN);
            n / d
        })
    }

    /// Exact non-negative square root, if `self` is the square of a rational.
    pub fn sqrt(&self) -> Option<Rational> {
        if self.is_negative() {
            return None;
        }
        let n = self.numer();
        let d = self.denom();
        let rn = n.sqrt();
        let rd = d.sqrt();
        if &(&rn * &rn) == n && &(&rd * &rd) == d {
            Some(Rational::from_big(rn, rd))
        } else {
            None
        }
    }

    /// Parses a finite decimal such as `-1.25`, `3`, `2.5e-3`, or a fraction `p/q`,
    /// without passing through floating point.
    pub fn parse_decimal(text: &str) -> Result<Rational, ExactError> {
        let t = text.trim();
        if t.contains('/') {
            return t.parse();
        }
        let bad = || ExactError::MalformedDecimal(text.to_string());
        let (mantissa, exponent) = match t.find(['e', 'E']) {
            Some(pos) => {
                let exp: i32 = t[pos + 1..].parse().map_err(|_| bad())?;
                (&t[..pos], exp)
            }
            None => (t, 0),
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
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let all_digits = format!("{int_part}{frac_part}");
        let mut numer: BigInt = all_digits.parse().map_err(|_| bad())?;
        if negative {
            numer = -numer;
        }
        let scale = exponent - frac_part.len() as i32;
        let ten = BigInt::from(10);
        let value = if scale >= 0 {
            Rational::from_big(numer * num_traits::pow(ten, scale as usize), BigInt::one())
        } else {
            Rational::from_big(numer, num_traits::pow(ten, (-scale) as usize))
        };
        Ok(value)
    }

    /// Continued-fraction reconstruction: the first convergent `p/q` of `x` with
    /// `q <= max_denom` and `|x - p/q| <= tol`.
    pub fn reconstruct(x: f64, max_denom: u64, tol: f64) -> Option<Rational> {
        if !x.is_finite() {
            return None;
        }
        // Convergent recurrences h_k = a_k h_{k-1} + h_{k-2}, same for k.
        let (mut h_prev, mut h) = (BigInt::zero(), BigInt::one());
        let (mut k_prev, mut k) = (BigInt::one(), BigInt::zero());
        let mut rest = x;
        for _ in 0..64 {
            let a = rest.floor();
            let a_big = BigInt::from(a as i64);
            let h_next = &a_big * &h + &h_prev;
            let k_next = &a_big * &k + &k_prev;
            if k_next > BigInt::from(max_denom) {
                return None;
            }
            let candidate = Rational::from_big(h_next.clone(), k_next.clone());
            if (candidate.to_f64() - x).abs() <= tol {
                return Some(candidate);
            }
            h_prev = std::mem::replace(&mut h, h_next);
            k_prev = std::mem::replace(&mut k, k_next);
            let frac = rest - a;
            if frac == 0.0 {
                return None;
            }
            rest = 1.0 / frac;
        }
        None
    }
}

impl FromStr for Rational {
    type Err = ExactError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let t = text.trim();
        let malformed = || ExactError::MalformedRational(text.to_string());
        let parse_int = |s: &str| -> Result<BigInt, ExactError> {
            let s = s.trim();
            let digits = s.strip_prefix(['-', '+']).unwrap_or(s);
            if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
                return Err(malformed());
            }
            s.parse::<BigInt>().map_err(|_| malformed())
        };
        match t.split_once('/') {
            Some((p, q)) => {
                let p = parse_int(p)?;
                let q = parse_int(q)?;
                if q.is_zero() {
                    return Err(ExactError::ZeroDenominator(text.to_string()));
                }
                Ok(Rational::from_big(p, q))
            }
            None => Ok(Rational::from_big(parse_int(t)?, BigInt::one())),
        }
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_integer(n)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational($trait::$method(&self.0, &rhs.0))
            }
        }
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational($trait::$method(self.0, rhs.0))
            }
        }
        impl $trait<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational($trait::$method(self.0, &rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

/// `{ offset + period * m : m in Z }`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Progression {
    offset: Rational,
    period: Rational,
}

impl Progression {
    /// Panics if `period <= 0`.
    pub fn new(offset: Rational, period: Rational) -> Self {
        assert!(period.0 > BigRational::zero(), "progression period must be positive");
        Progression { offset, period }
    }

    pub fn offset(&self) -> &Rational {
        &self.offset
    }

    pub fn period(&self) -> &Rational {
        &self.period
    }

    pub fn contains(&self, x: &Rational) -> bool {
        ((x - &self.offset) / &self.period).is_integer()
    }

    /// Distance from `x` to the nearest lattice point, via rounding.
    pub fn distance(&self, x: f64) -> f64 {
        let offset = self.offset.to_f64();
        let period = self.period.to_f64();
        let m = ((x - offset) / period).round();
        (x - (offset + period * m)).abs()
    }
}

impl fmt::Display for Progression {
    /// Canonical text: `Z`, `(1/2)Z`, `2Z+1` for integer offsets, `4/3+2Z` otherwise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lattice = if self.period == Rational::one() {
            "Z".to_string()
        } else if self.period.is_integer() {
            format!("{}Z", self.period)
        } else {
            format!("({})Z", self.period)
        };
        if self.offset.is_zero() {
            write!(f, "{lattice}")
        } else if self.offset.is_integer() {
            if self.offset.is_negative() {
                write!(f, "{lattice}{}", self.offset)
            } else {
                write!(f, "{lattice}+{}", self.offset)
            }
        } else {
            write!(f, "{}+{lattice}", self.offset)
        }
    }
}

/// A finite, nonempty union of progressions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArithmeticSet {
    progressions: Vec<Progression>,
}

impl ArithmeticSet {
    /// Panics on an empty list.
    pub fn new(progressions: Vec<Progression>) -> Self {
        assert!(!progressions.is_empty(), "arithmetic set needs at least one progression");
        ArithmeticSet { progressions }
    }

    pub fn progressions(&self) -> &[Progression] {
        &self.progressions
    }

    pub fn contains_exact(&self, x: &Rational) -> bool {
        self.progressions.iter().any(|p| p.contains(x))
    }

    /// True iff `|Im z| <= tol` and `Re z` lies within `tol` of some progression.
    pub fn contains_numeric(&self, z: Complex64, tol: f64) -> bool {
        debug_assert!(tol > 0.0);
        z.im.abs() <= tol && self.distance(z.re) <= tol
    }

    /// Distance from a real number to the union.
    pub fn distance(&self, x: f64) -> f64 {
        self.progressions
            .iter()
            .map(|p| p.distance(x))
            .fold(f64::INFINITY, f64::min)
    }
}

impl fmt::Display for ArithmeticSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let [only] = self.progressions.as_slice() {
            return write!(f, "{only}");
        }
        for (i, p) in self.progressions.iter().enumerate() {
            if i > 0 {
                write!(f, "∪")?;
            }
            let text = p.to_string();
            if text.contains('+') || text.contains('-') {
                write!(f, "({text})")?;
            } else {
                write!(f, "{text}")?;
            }
        }
        Ok(())
    }
}

impl PartialOrd<i64> for Rational {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        Some(self.cmp(&Rational::from_integer(*other)))
    }
}

impl PartialEq<i64> for Rational {
    fn eq(&self, other: &i64) -> bool {
        *self == Rational::from_integer(*other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn prog(offset: &str, period: &str) -> Progression {
        Progression::new(r(offset), r(period))
    }

    #[test]
    fn parse_reduces_and_prints() {
        assert_eq!(r("4/3").to_string(), "4/3");
        assert_eq!(r("6/4"), r("3/2"));
        assert_eq!(r("6/4").to_string(), "3/2");
        assert_eq!(r("-10/-4").to_string(), "5/2");
        assert_eq!(r("3/-6").to_string(), "-1/2");
        assert_eq!(r(" 7 ").to_string(), "7");
        assert_eq!(r("8/4").to_string(), "2");
    }

    #[test]
    fn parse_errors() {
        assert!(matches!("1/0".parse::<Rational>(), Err(ExactError::ZeroDenominator(_))));
        for bad in ["", "1.5", "a/b", "1/", "/2", "1/2/3", "--1", "1 2"] {
            assert!(
                matches!(bad.parse::<Rational>(), Err(ExactError::MalformedRational(_))),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(Rational::parse_decimal("0.1").unwrap(), r("1/10"));
        assert_eq!(Rational::parse_decimal("-1.25").unwrap(), r("-5/4"));
        assert_eq!(Rational::parse_decimal("2.5e-3").unwrap(), r("1/400"));
        assert_eq!(Rational::parse_decimal("3E2").unwrap(), r("300"));
        assert_eq!(Rational::parse_decimal(".5").unwrap(), r("1/2"));
        assert_eq!(Rational::parse_decimal("1/3").unwrap(), r("1/3"));
        assert!(Rational::parse_decimal("1.2.3").is_err());
        assert!(Rational::parse_decimal("abc").is_err());
        assert!(Rational::parse_decimal(".").is_err());
    }

    #[test]
    fn sqrt_cases() {
        assert_eq!(r("9/4").sqrt(), Some(r("3/2")));
        assert_eq!(r("2").sqrt(), None);
        assert_eq!(r("0").sqrt(), Some(r("0")));
        assert_eq!(r("-4").sqrt(), None);
        assert_eq!(r("8/18").sqrt(), Some(r("2/3")));
    }

    #[test]
    fn progression_membership() {
        assert!(prog("1/2", "1").contains(&r("3/2")));
        assert!(prog("6/5", "2").contains(&r("6/5")));
        assert!(!prog("4/3", "2").contains(&r("2/3")));
        assert!(prog("4/3", "2").contains(&r("-2/3")));
    }

    #[test]
    fn set_membership_exact() {
        let row2 = ArithmeticSet::new(vec![prog("1", "2"), prog("4/3", "2"), prog("6/5", "2")]);
        let row3 = ArithmeticSet::new(vec![prog("0", "1/2"), prog("1/3", "2"), prog("1/5", "2")]);
        let half = ArithmeticSet::new(vec![prog("1/2", "1")]);
        assert!(row2.contains_exact(&r("1")));
        assert!(!half.contains_exact(&r("0")));
        assert!(row3.contains_exact(&r("0")));
    }

    #[test]
    fn set_membership_numeric() {
        let half = ArithmeticSet::new(vec![prog("1/2", "1")]);
        assert!(half.contains_numeric(Complex64::new(1.5000000001, 0.0), 1e-6));
        assert!(!half.contains_numeric(Complex64::new(1.5, 0.1), 1e-6));
        assert!(!half.contains_numeric(Complex64::new(0.25, 0.0), 1e-6));
    }

    #[test]
    fn canonical_set_text() {
        let row2 = ArithmeticSet::new(vec![prog("1", "2"), prog("4/3", "2"), prog("6/5", "2")]);
        assert_eq!(row2.to_string(), "(2Z+1)∪(4/3+2Z)∪(6/5+2Z)");
        let row3 = ArithmeticSet::new(vec![prog("0", "1/2"), prog("1/3", "2"), prog("1/5", "2")]);
        assert_eq!(row3.to_string(), "(1/2)Z∪(1/3+2Z)∪(1/5+2Z)");
        assert_eq!(ArithmeticSet::new(vec![prog("1/2", "1")]).to_string(), "1/2+Z");
    }

    #[test]
    fn reconstruct_from_float() {
        assert_eq!(Rational::reconstruct(0.75, 10_000, 1e-12), Some(r("3/4")));
        assert_eq!(Rational::reconstruct(-25.0 / 16.0, 10_000, 1e-12), Some(r("-25/16")));
        assert_eq!(Rational::reconstruct(1.0 / 3.0, 10_000, 1e-12), Some(r("1/3")));
        assert_eq!(Rational::reconstruct(2.0, 10_000, 1e-12), Some(r("2")));
        assert_eq!(Rational::reconstruct(std::f64::consts::PI, 10_000, 1e-12), None);
        assert_eq!(Rational::reconstruct(2f64.sqrt(), 10_000, 1e-12), None);
    }

    #[test]
    fn big_denominators_do_not_overflow() {
        let alpha = r("999999/1000000");
        let v = (r("3/2") * &alpha + Rational::one()).square();
        assert_eq!(v.denom().to_string(), "4000000000000");
        assert!((v.to_f64() - (1.5 * 0.999999 + 1.0f64).powi(2)).abs() < 1e-12);
    }

    fn arb_rational() -> impl Strategy<Value = Rational> {
        (-1_000_000i64..=1_000_000, 1i64..=1_000_000).prop_map(|(p, q)| Rational::new(p, q))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn print_parse_round_trip(x in arb_rational()) {
            prop_assert_eq!(x.to_string().parse::<Rational>().unwrap(), x);
        }

        #[test]
        fn sqrt_of_square(x in arb_rational()) {
            prop_assert_eq!(x.square().sqrt(), Some(x.abs()));
        }

        #[test]
        fn membership_is_periodic(
            x in arb_rational(),
            offset in arb_rational(),
            period in (1i64..50, 1i64..50).prop_map(|(p, q)| Rational::new(p, q)),
            shift in -5i64..5,
        ) {
            let p = Progression::new(offset, period.clone());
            let shifted = &x + &(&period * &Rational::from_integer(shift));
            prop_assert_eq!(p.contains(&x), p.contains(&shifted));
        }

        #[test]
        fn exact_and_numeric_agree(
            num in -400i64..400,
            den in 1i64..60,
        ) {
            let x = Rational::new(num, den);
            let set = ArithmeticSet::new(vec![prog("1", "2"), prog("4/3", "2"), prog("6/5", "2")]);
            let dist = set.distance(x.to_f64());
            prop_assume!(dist == 0.0 || dist >= 1e-6 || set.contains_exact(&x));
            prop_assert_eq!(
                set.contains_exact(&x),
                set.contains_numeric(Complex64::new(x.to_f64(), 0.0), 1e-9)
            );
        }
    }
}
