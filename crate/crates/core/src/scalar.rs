//! Numeric types the analytic model and the channel algebra are generic over.

use std::fmt::{Debug, Display};

use num_rational::{Ratio, Rational64};
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// A real-valued scalar: `f32`, `f64`, or an exact rational.
pub trait Scalar: Num + Copy + PartialOrd + Debug + Display + Send + Sync {
    fn from_count(n: u64) -> Self;

    /// Nearest representable value for a decimal parameter such as `0.3`.
    /// Rationals recover the shortest fraction within 1e-12.
    fn from_f64(x: f64) -> Option<Self>;

    fn to_f64(self) -> f64;
}

impl Scalar for f64 {
    fn from_count(n: u64) -> Self {
        n as f64
    }

    fn from_f64(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }

    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn from_count(n: u64) -> Self {
        n as f32
    }

    fn from_f64(x: f64) -> Option<Self> {
        x.is_finite().then_some(x as f32)
    }

    fn to_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for Rational64 {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(n as i64)
    }

    fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        // Smallest denominator that reproduces the decimal; fall back to the
        // exact binary expansion.
        let mut den: i64 = 1;
        while den <= 1_000_000_000 {
            let num = (x * den as f64).round();
            if ((num / den as f64) - x).abs() <= 1e-12 {
                return Some(Ratio::new(num as i64, den));
            }
            den *= 10;
        }
        <Ratio<i64> as FromPrimitive>::from_f64(x)
    }

    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}
