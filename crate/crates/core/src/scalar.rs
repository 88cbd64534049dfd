//! Scalar abstraction for the numeric kernels.
//!
//! Everything that does floating-point math (EM aggregation, agreement
//! coefficients, CRF recursions, ridge regression, metrics) is generic over
//! [`Real`] so it runs on `f32` or `f64`. Counting and rendering code is not.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, for literals and counts.
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 converts to any Real")
    }

    /// Conversion from a count.
    fn from_usize_lossy(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("usize converts to any Real")
    }

    /// Lossy conversion to `f64` for reporting.
    fn to_f64_lossy(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("any Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Numerically stable `log(sum(exp(xs)))`.
pub fn log_sum_exp<R: Real>(xs: &[R]) -> R {
    let max = xs.iter().cloned().fold(R::neg_infinity(), R::max);
    if !max.is_finite() {
        return max;
    }
    let sum: R = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}
