//! Scalar abstraction for similarity, LCU scores and evaluation metrics.
//!
//! Every quantity the pipeline computes is a ratio of small counts followed by
//! additions, subtractions, multiplications and divisions. That makes the math
//! representable exactly with rationals, which the test suite uses as an
//! independent check on the floating point path.

use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::{Num, ToPrimitive};

/// Numeric type usable as a similarity or score value.
pub trait Score:
    Num + Copy + PartialOrd + Debug + Display + Send + Sync + 'static
{
    /// `num / den` as a value of this type. `den` must be non-zero.
    fn from_ratio(num: u64, den: u64) -> Self;

    /// Closest representation of an `f64` configuration value.
    fn from_f64(value: f64) -> Self;

    fn to_f64(self) -> f64;

    fn from_count(n: usize) -> Self {
        Self::from_ratio(n as u64, 1)
    }

    fn abs_diff(self, other: Self) -> Self {
        if self >= other {
            self - other
        } else {
            other - self
        }
    }
}

impl Score for f64 {
    fn from_ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }

    fn from_f64(value: f64) -> Self {
        value
    }

    fn to_f64(self) -> f64 {
        self
    }
}

impl Score for f32 {
    fn from_ratio(num: u64, den: u64) -> Self {
        (num as f64 / den as f64) as f32
    }

    fn from_f64(value: f64) -> Self {
        value as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Score for Ratio<i64> {
    fn from_ratio(num: u64, den: u64) -> Self {
        Ratio::new(num as i64, den as i64)
    }

    /// Decimal configuration values (0.33, 0.7) are read as the shortest
    /// decimal fraction that prints the same, not the binary expansion.
    fn from_f64(value: f64) -> Self {
        let mut den: i64 = 1;
        while den < 1_000_000_000 {
            let scaled = value * den as f64;
            if (scaled - scaled.round()).abs() < 1e-9 {
                return Ratio::new(scaled.round() as i64, den);
            }
            den *= 10;
        }
        Ratio::approximate_float(value).unwrap_or_else(|| Ratio::new(0, 1))
    }

    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}
