//! Scalar abstractions.
//!
//! The algebraic layer (transition matrices, the restart-factor recurrence,
//! trajectories) only needs ring operations plus division, so it is written
//! against [`Scalar`], which is implemented for `f32`, `f64` and exact
//! rationals. Anything that needs square roots, logarithms or angles is
//! written against [`Real`].

use std::fmt::{Debug, Display};
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Float, FloatConst, FromPrimitive, Num, Signed, ToPrimitive};

/// Field-like scalar used by the linear dynamics.
pub trait Scalar:
    Clone + PartialOrd + Num + Neg<Output = Self> + Debug + Display + Send + Sync + 'static
{
    /// `false` for NaN and infinities. Exact types are always finite.
    fn is_finite_value(&self) -> bool;

    fn to_f64_lossy(&self) -> f64;

    /// Converts an `f64` literal. Exact types convert the binary value exactly.
    fn from_f64_lossy(v: f64) -> Self;

    fn abs_value(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn from_usize(n: usize) -> Self {
        Self::from_f64_lossy(n as f64)
    }
}

impl Scalar for f64 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }

    fn to_f64_lossy(&self) -> f64 {
        *self
    }

    fn from_f64_lossy(v: f64) -> Self {
        v
    }
}

impl Scalar for f32 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }

    fn to_f64_lossy(&self) -> f64 {
        f64::from(*self)
    }

    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for BigRational {
    fn is_finite_value(&self) -> bool {
        true
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_f64_lossy(v: f64) -> Self {
        Ratio::from_float(v).expect("non-finite value cannot be represented as a rational")
    }

    fn abs_value(&self) -> Self {
        self.abs()
    }

    fn from_usize(n: usize) -> Self {
        Ratio::from_integer(BigInt::from_usize(n).expect("usize fits in BigInt"))
    }
}

/// Floating-point scalar for spectral analysis.
pub trait Real: Scalar + Float + FloatConst {}

impl<T: Scalar + Float + FloatConst> Real for T {}

/// Shorthand for converting an `f64` constant into `T`.
#[inline]
pub fn lit<T: Scalar>(v: f64) -> T {
    T::from_f64_lossy(v)
}

/// Builds an exact rational `num / den`.
pub fn rational(num: i64, den: i64) -> BigRational {
    Ratio::new(BigInt::from(num), BigInt::from(den))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_from_float_is_exact() {
        let r = BigRational::from_f64_lossy(0.5);
        assert_eq!(r, rational(1, 2));
        assert_eq!(<BigRational as Scalar>::from_usize(7), rational(7, 1));
    }

    #[test]
    fn finiteness() {
        assert!(!f64::NAN.is_finite_value());
        assert!(!f32::INFINITY.is_finite_value());
        assert!(rational(3, 7).is_finite_value());
        assert_eq!((-2.5f64).abs_value(), 2.5);
        assert_eq!(rational(-3, 7).abs_value(), rational(3, 7));
    }
}
