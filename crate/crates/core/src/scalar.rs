//! Scalar abstraction for the numeric core.
//!
//! Matrix math (resampling, classifiers, metric sweeps) is generic over
//! [`Scalar`] so the same code runs on `f32` or `f64`. The pipeline itself
//! instantiates everything at `f64`; see the crate-root aliases.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar usable across the numeric core.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossless-enough conversion from `f64` for constants and counts.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable in scalar type")
    }

    /// Conversion from a row/element count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Logistic map onto (0, 1); used to satisfy the `[0, 1]` score contract
/// for margin-based models.
pub fn logistic<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}
