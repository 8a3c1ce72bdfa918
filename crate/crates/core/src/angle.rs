//! Exact rotation angles.
//!
//! An [`Angle`] is a rational multiple of π kept in lowest terms and
//! normalised into the half-open interval (−π, π]. All diagram weights and
//! gate parameters use this type; floating point only appears in the
//! simulator.

use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Error returned when parsing the `p/q` text form fails.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseAngleError {
    #[error("empty angle")]
    Empty,
    #[error("invalid integer `{0}` in angle")]
    BadInteger(String),
    #[error("zero denominator in angle `{0}`")]
    ZeroDenominator(String),
}

/// A rotation angle pπ/q with −q < p ≤ q and gcd(p, q) = 1.
///
/// The stored value is the coefficient of π, so `Angle::pi()` holds 1.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Angle(BigRational);

impl Angle {
    /// Builds pπ/q, normalising modulo 2π. Panics on `den == 0`.
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Self {
        let den = den.into();
        assert!(!den.is_zero(), "angle denominator must be nonzero");
        Self::from_ratio(BigRational::new(num.into(), den))
    }

    /// Normalises an arbitrary rational coefficient of π into (−1, 1].
    pub fn from_ratio(r: BigRational) -> Self {
        let two = BigRational::from_integer(BigInt::from(2));
        // r - 2 * ceil((r - 1) / 2) lies in (-1, 1].
        let k = ((&r - BigRational::one()) / &two).ceil();
        Angle(r - k * two)
    }

    pub fn zero() -> Self {
        Angle(BigRational::zero())
    }

    pub fn pi() -> Self {
        Angle(BigRational::one())
    }

    /// π / 2^k.
    pub fn pi_over_pow2(k: u32) -> Self {
        Self::new(1, BigInt::one() << k)
    }

    /// Numerator p of pπ/q.
    pub fn num(&self) -> &BigInt {
        self.0.numer()
    }

    /// Denominator q of pπ/q, always positive.
    pub fn den(&self) -> &BigInt {
        self.0.denom()
    }

    /// The coefficient of π as an exact rational.
    pub fn ratio(&self) -> &BigRational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_pi(&self) -> bool {
        self.0.is_one()
    }

    /// Normalised sum modulo 2π.
    pub fn add(&self, other: &Angle) -> Angle {
        Angle::from_ratio(&self.0 + &other.0)
    }

    /// Additive inverse; `negate(π) = π`.
    pub fn negate(&self) -> Angle {
        Angle::from_ratio(-&self.0)
    }

    pub fn sub(&self, other: &Angle) -> Angle {
        Angle::from_ratio(&self.0 - &other.0)
    }

    /// (a2 − a1)/2 computed on the normalised representatives before
    /// reducing, so the result is exact.
    pub fn half_difference(a2: &Angle, a1: &Angle) -> Angle {
        let two = BigRational::from_integer(BigInt::from(2));
        Angle::from_ratio((&a2.0 - &a1.0) / two)
    }

    /// Half of the normalised representative.
    pub fn half(&self) -> Angle {
        Angle::half_difference(self, &Angle::zero())
    }

    /// Value in radians.
    pub fn to_radians(&self) -> f64 {
        self.0.to_f64().unwrap_or(0.0) * std::f64::consts::PI
    }

    /// Finds pπ/q with q ≤ `max_den` within `tol` radians of `radians`
    /// (taken modulo 2π). The smallest such denominator wins.
    pub fn snap(radians: f64, max_den: u32, tol: f64) -> Option<Angle> {
        if !radians.is_finite() {
            return None;
        }
        let x = radians / std::f64::consts::PI;
        // Reduce into (-1, 1] first so rounding works on small numbers.
        let x = x - 2.0 * ((x - 1.0) / 2.0).ceil();
        for q in 1..=max_den {
            let p = (x * q as f64).round();
            let err = (p / q as f64 - x).abs() * std::f64::consts::PI;
            if err <= tol {
                return Some(Angle::new(BigInt::from(p as i64), BigInt::from(q)));
            }
        }
        None
    }
}

impl Default for Angle {
    fn default() -> Self {
        Angle::zero()
    }
}

impl Add for &Angle {
    type Output = Angle;
    fn add(self, rhs: &Angle) -> Angle {
        Angle::add(self, rhs)
    }
}

impl Add for Angle {
    type Output = Angle;
    fn add(self, rhs: Angle) -> Angle {
        Angle::add(&self, &rhs)
    }
}

impl Sub for &Angle {
    type Output = Angle;
    fn sub(self, rhs: &Angle) -> Angle {
        Angle::sub(self, rhs)
    }
}

impl Sub for Angle {
    type Output = Angle;
    fn sub(self, rhs: Angle) -> Angle {
        Angle::sub(&self, &rhs)
    }
}

impl Neg for &Angle {
    type Output = Angle;
    fn neg(self) -> Angle {
        self.negate()
    }
}

impl Neg for Angle {
    type Output = Angle;
    fn neg(self) -> Angle {
        self.negate()
    }
}

/// Text form `p/q`, with integers printed bare (`0`, `1`).
impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den().is_one() {
            write!(f, "{}", self.num())
        } else {
            write!(f, "{}/{}", self.num(), self.den())
        }
    }
}

impl fmt::Debug for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Angle({self})")
    }
}

impl FromStr for Angle {
    type Err = ParseAngleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ParseAngleError::Empty);
        }
        let parse_int = |t: &str| {
            t.parse::<BigInt>()
                .map_err(|_| ParseAngleError::BadInteger(t.to_string()))
        };
        let (num, den) = match s.split_once('/') {
            Some((p, q)) => (parse_int(p)?, parse_int(q)?),
            None => (parse_int(s)?, BigInt::one()),
        };
        if den.is_zero() {
            return Err(ParseAngleError::ZeroDenominator(s.to_string()));
        }
        Ok(Angle::new(num, den))
    }
}

/// Human-readable form using π, e.g. `-π/2`, `3π/4`, `π`, `0`.
pub struct PiFmt<'a>(pub &'a Angle);

impl fmt::Display for PiFmt<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.0;
        if a.is_zero() {
            return write!(f, "0");
        }
        let p = a.num();
        let sign = if p.is_negative() { "-" } else { "" };
        let mag = p.abs();
        let head = if mag.is_one() {
            format!("{sign}π")
        } else {
            format!("{sign}{mag}π")
        };
        if a.den().is_one() {
            write!(f, "{head}")
        } else {
            write!(f, "{head}/{}", a.den())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a(p: i64, q: i64) -> Angle {
        Angle::new(p, q)
    }

    #[test]
    fn add_examples() {
        assert_eq!(a(1, 2) + a(1, 2), Angle::pi());
        assert_eq!(Angle::pi() + Angle::pi(), Angle::zero());
        assert_eq!(Angle::pi() + a(1, 2), a(-1, 2));
    }

    #[test]
    fn negate_examples() {
        assert_eq!(a(1, 4).negate(), a(-1, 4));
        assert_eq!(Angle::pi().negate(), Angle::pi());
        assert_eq!(Angle::zero().negate(), Angle::zero());
    }

    #[test]
    fn half_difference_examples() {
        assert_eq!(Angle::half_difference(&Angle::pi(), &Angle::zero()), a(1, 2));
        assert_eq!(Angle::half_difference(&a(1, 2), &Angle::zero()), a(1, 4));
        assert_eq!(
            Angle::half_difference(&Angle::zero(), &Angle::zero()),
            Angle::zero()
        );
    }

    #[test]
    fn normalisation_bounds() {
        assert_eq!(a(-1, 1), Angle::pi());
        assert_eq!(a(3, 2), a(-1, 2));
        assert_eq!(a(7, 1), Angle::pi());
        assert_eq!(a(-7, 4), a(1, 4));
        assert_eq!(a(2, 4).num(), &BigInt::from(1));
        assert_eq!(a(2, 4).den(), &BigInt::from(2));
    }

    #[test]
    fn text_form() {
        assert_eq!(a(-1, 2).to_string(), "-1/2");
        assert_eq!(Angle::pi().to_string(), "1");
        assert_eq!(Angle::zero().to_string(), "0");
        assert_eq!(a(3, 4).to_string(), "3/4");
        assert_eq!("1".parse::<Angle>().unwrap(), Angle::pi());
        assert_eq!("0".parse::<Angle>().unwrap(), Angle::zero());
        assert_eq!("6/4".parse::<Angle>().unwrap(), a(-1, 2));
        assert!(matches!(
            "2/0".parse::<Angle>(),
            Err(ParseAngleError::ZeroDenominator(_))
        ));
        assert!("x/2".parse::<Angle>().is_err());
        assert!("".parse::<Angle>().is_err());
    }

    #[test]
    fn pi_format() {
        assert_eq!(PiFmt(&a(-1, 2)).to_string(), "-π/2");
        assert_eq!(PiFmt(&a(3, 4)).to_string(), "3π/4");
        assert_eq!(PiFmt(&Angle::pi()).to_string(), "π");
        assert_eq!(PiFmt(&Angle::zero()).to_string(), "0");
    }

    #[test]
    fn snapping() {
        let x = 3.0 * std::f64::consts::PI / 4.0;
        assert_eq!(Angle::snap(x, 4096, 1e-9), Some(a(3, 4)));
        assert_eq!(Angle::snap(-x, 4096, 1e-9), Some(a(-3, 4)));
        assert_eq!(Angle::snap(2.0 * std::f64::consts::PI, 4096, 1e-9), Some(Angle::zero()));
        assert_eq!(Angle::snap(1.0, 4096, 1e-9), None);
    }

    #[test]
    fn deep_dyadic_stays_exact() {
        let tiny = Angle::pi_over_pow2(200);
        let mut acc = Angle::zero();
        for _ in 0..4 {
            acc = &acc + &tiny;
        }
        assert_eq!(acc, Angle::pi_over_pow2(198));
    }

    fn arb_angle() -> impl Strategy<Value = Angle> {
        (-64i64..=64, 1i64..=32).prop_map(|(p, q)| Angle::new(p, q))
    }

    proptest! {
        #[test]
        fn add_assoc_comm(x in arb_angle(), y in arb_angle(), z in arb_angle()) {
            prop_assert_eq!(&x + &y, &y + &x);
            prop_assert_eq!(&(&x + &y) + &z, &x + &(&y + &z));
        }

        #[test]
        fn identity_and_inverse(x in arb_angle()) {
            prop_assert_eq!(&x + &Angle::zero(), x.clone());
            prop_assert_eq!(&x + &x.negate(), Angle::zero());
        }

        #[test]
        fn normalisation_idempotent(x in arb_angle()) {
            let again = Angle::new(x.num().clone(), x.den().clone());
            prop_assert_eq!(&again, &x);
            let one = BigRational::one();
            prop_assert!(x.ratio() > &-one.clone() && x.ratio() <= &one);
        }

        #[test]
        fn half_difference_doubles_back(x in arb_angle(), y in arb_angle()) {
            let h = Angle::half_difference(&x, &y);
            prop_assert_eq!(&h + &h, &x - &y);
        }

        #[test]
        fn text_round_trip(x in arb_angle()) {
            prop_assert_eq!(x.to_string().parse::<Angle>().unwrap(), x);
        }
    }
}
