//! Scalar abstraction for the solver.
//!
//! All numerical kernels are generic over [`Real`], which bundles the
//! floating-point traits the pipeline needs (arithmetic, constants,
//! conversions and FFT support). `f32` and `f64` implement it; the crate
//! root exports `f64` aliases for the common types.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::FftNum;

/// Floating-point scalar usable throughout the solver.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + FftNum
    + Sum
    + Display
    + LowerExp
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Euler-Mascheroni constant `γ`.
    fn euler_gamma() -> Self;

    /// Converts an `f64` constant into `Self`, panicking on failure.
    /// Intended for literals and coefficients, which always fit.
    fn of(v: f64) -> Self;

    /// Converts a count into `Self`.
    fn of_usize(n: usize) -> Self;

    /// Widens to `f64` (exact for `f32` and `f64`).
    fn as_f64(self) -> f64;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn euler_gamma() -> Self {
                0.577215664901532860606512090082402431 as $t
            }

            #[inline]
            fn of(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn of_usize(n: usize) -> Self {
                n as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip() {
        assert_eq!(f64::of(1.5), 1.5);
        assert_eq!(f32::of(1.5), 1.5f32);
        assert_eq!(f64::of_usize(7), 7.0);
        assert_eq!(2.25f64.as_f64(), 2.25);
    }

    #[test]
    fn gamma_matches_reference() {
        assert!((f64::euler_gamma() - 0.5772156649015329).abs() < 1e-16);
    }
}
