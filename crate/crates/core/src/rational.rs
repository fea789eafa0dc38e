//! Exact rationals extended with infinities.
//!
//! Prices, costs, probabilities, and welfare are all `BigRational`; no
//! floating point enters any computation or artifact. Two extensions are
//! needed: `+inf` marks an unproducible copy (or an absent price), `-inf`
//! the welfare of an infeasible allocation. The only undefined combination,
//! `+inf + -inf`, panics — it never arises from a well-formed model.

use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

/// Finite exact rational.
pub type Rat = BigRational;

/// Build a rational from an integer. Test and generator convenience.
pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Build a rational `n/d`. Panics if `d == 0`.
pub fn ratio(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// A rational extended with `-inf` and `+inf`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtRat {
    NegInf,
    Finite(Rat),
    PosInf,
}

impl ExtRat {
    pub fn zero() -> Self {
        ExtRat::Finite(Rat::zero())
    }

    pub fn from_int(n: i64) -> Self {
        ExtRat::Finite(rat(n))
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtRat::Finite(_))
    }

    pub fn finite(&self) -> Option<&Rat> {
        match self {
            ExtRat::Finite(r) => Some(r),
            _ => None,
        }
    }

    /// Unwrap a finite value, reporting `context` on failure.
    pub fn expect_finite(self, context: &'static str) -> crate::Result<Rat> {
        match self {
            ExtRat::Finite(r) => Ok(r),
            _ => Err(crate::Error::NotFinite(context)),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExtRat::Finite(r) if r.is_zero())
    }
}

impl From<Rat> for ExtRat {
    fn from(r: Rat) -> Self {
        ExtRat::Finite(r)
    }
}

impl From<&Rat> for ExtRat {
    fn from(r: &Rat) -> Self {
        ExtRat::Finite(r.clone())
    }
}

impl PartialOrd for ExtRat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtRat {
    fn cmp(&self, other: &Self) -> Ordering {
        use ExtRat::*;
        match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (_, NegInf) | (PosInf, _) => Ordering::Greater,
            (Finite(a), Finite(b)) => a.cmp(b),
        }
    }
}

impl Add for ExtRat {
    type Output = ExtRat;
    fn add(self, rhs: ExtRat) -> ExtRat {
        use ExtRat::*;
        match (self, rhs) {
            (Finite(a), Finite(b)) => Finite(a + b),
            (PosInf, NegInf) | (NegInf, PosInf) => {
                panic!("inf + -inf is undefined in this model")
            }
            (PosInf, _) | (_, PosInf) => PosInf,
            (NegInf, _) | (_, NegInf) => NegInf,
        }
    }
}

impl Sub for ExtRat {
    type Output = ExtRat;
    fn sub(self, rhs: ExtRat) -> ExtRat {
        self + (-rhs)
    }
}

impl Neg for ExtRat {
    type Output = ExtRat;
    fn neg(self) -> ExtRat {
        match self {
            ExtRat::NegInf => ExtRat::PosInf,
            ExtRat::Finite(r) => ExtRat::Finite(-r),
            ExtRat::PosInf => ExtRat::NegInf,
        }
    }
}

impl Mul for ExtRat {
    type Output = ExtRat;
    fn mul(self, rhs: ExtRat) -> ExtRat {
        use ExtRat::*;
        match (self, rhs) {
            (Finite(a), Finite(b)) => Finite(a * b),
            (Finite(a), inf) | (inf, Finite(a)) => {
                if a.is_zero() {
                    panic!("0 * inf is undefined in this model");
                } else if a.is_positive() {
                    inf
                } else {
                    -inf
                }
            }
            (PosInf, PosInf) | (NegInf, NegInf) => PosInf,
            (PosInf, NegInf) | (NegInf, PosInf) => NegInf,
        }
    }
}

impl Div for ExtRat {
    type Output = ExtRat;
    /// Division is only used on finite/finite (nonzero divisor) and
    /// finite/inf (-> 0); anything else panics.
    fn div(self, rhs: ExtRat) -> ExtRat {
        use ExtRat::*;
        match (self, rhs) {
            (Finite(a), Finite(b)) => {
                assert!(!b.is_zero(), "division by zero");
                Finite(a / b)
            }
            (Finite(_), PosInf) | (Finite(_), NegInf) => ExtRat::zero(),
            _ => panic!("inf / x is undefined in this model"),
        }
    }
}

impl core::iter::Sum for ExtRat {
    fn sum<I: Iterator<Item = ExtRat>>(iter: I) -> ExtRat {
        iter.fold(ExtRat::zero(), |acc, x| acc + x)
    }
}

impl fmt::Display for ExtRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtRat::NegInf => write!(f, "-inf"),
            ExtRat::Finite(r) => write!(f, "{}", r),
            ExtRat::PosInf => write!(f, "inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_places_infinities_at_the_ends() {
        let vals = [
            ExtRat::NegInf,
            ExtRat::from_int(-3),
            ExtRat::Finite(ratio(1, 2)),
            ExtRat::from_int(7),
            ExtRat::PosInf,
        ];
        for w in vals.windows(2) {
            assert!(w[0] < w[1], "{} < {}", w[0], w[1]);
        }
    }

    #[test]
    fn absorbing_addition() {
        assert_eq!(ExtRat::PosInf + ExtRat::from_int(5), ExtRat::PosInf);
        assert_eq!(ExtRat::from_int(5) + ExtRat::NegInf, ExtRat::NegInf);
        assert_eq!(
            ExtRat::from_int(2) + ExtRat::Finite(ratio(1, 2)),
            ExtRat::Finite(ratio(5, 2))
        );
    }

    #[test]
    #[should_panic]
    fn opposite_infinities_panic() {
        let _ = ExtRat::PosInf + ExtRat::NegInf;
    }

    #[test]
    fn signed_multiplication_with_infinity() {
        assert_eq!(ExtRat::from_int(-2) * ExtRat::PosInf, ExtRat::NegInf);
        assert_eq!(ExtRat::from_int(3) * ExtRat::PosInf, ExtRat::PosInf);
    }

    #[test]
    fn display_matches_reduced_form() {
        use alloc::string::ToString;
        assert_eq!(ExtRat::Finite(ratio(4, 2)).to_string(), "2");
        assert_eq!(ExtRat::Finite(ratio(-3, 9)).to_string(), "-1/3");
        assert_eq!(ExtRat::PosInf.to_string(), "inf");
        assert_eq!(ExtRat::NegInf.to_string(), "-inf");
    }
}
