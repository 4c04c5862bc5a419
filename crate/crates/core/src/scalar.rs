//! Floating-point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};
use realfft::FftNum;

/// Real scalar the network and signal code is generic over.
///
/// Implemented for `f32` and `f64`. Training runs in `f64`; `f32` is for
/// inference-only copies of a trained model.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + FftNum + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant, rounding to the nearest representable value.
    fn lit(v: f64) -> Self;

    fn to_f64_lossless(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn lit(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn to_f64_lossless(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn lit(v: f64) -> Self {
        v
    }

    #[inline]
    fn to_f64_lossless(self) -> f64 {
        self
    }
}

/// Converts a count to a scalar.
#[inline]
pub(crate) fn count<T: Scalar>(n: usize) -> T {
    T::lit(n as f64)
}
