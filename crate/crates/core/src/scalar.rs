//! Scalar abstractions shared by the numeric modules.
//!
//! Continuous geometry, tracking and car-following code is generic over
//! [`Real`] (f32 or f64). The maneuver planner only needs an ordered ring for
//! its cost weights, so it is generic over [`Weight`], which also admits exact
//! rationals such as `num_rational::Ratio<i64>`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, Num, NumAssign};

/// Floating point scalar: f32 or f64.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an f64 literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Cost-weight scalar for the binary maneuver program.
///
/// Only ring operations and a total order on the values actually produced are
/// required; floats and exact rationals both qualify.
pub trait Weight: Num + Copy + PartialOrd + Debug + Send + Sync + 'static {
    /// Builds `n` as a sum of ones, so no conversion trait is needed.
    fn from_count(n: usize) -> Self {
        let mut acc = Self::zero();
        let mut step = Self::one();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc + step;
            }
            step = step + step;
            n >>= 1;
        }
        acc
    }
}

impl<T> Weight for T where T: Num + Copy + PartialOrd + Debug + Send + Sync + 'static {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_count_builds_integers() {
        assert_eq!(<f64 as Weight>::from_count(0), 0.0);
        assert_eq!(<f64 as Weight>::from_count(13), 13.0);
        assert_eq!(<i64 as Weight>::from_count(1024), 1024);
    }

    #[test]
    fn lit_roundtrip() {
        assert_eq!(f32::lit(0.5), 0.5f32);
        assert_eq!(f64::lit(17.5).to_f64_lossy(), 17.5);
    }
}
