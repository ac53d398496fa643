//! Scalar abstractions shared by the topology and learning code.
//!
//! The persistence and boundary computations only need an ordered field with
//! an absolute value, so they are generic over [`Scalar`] and run unchanged on
//! `f32`, `f64` or exact rationals. Training needs transcendental functions
//! and is generic over [`Real`].

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, Signed, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Ordered signed scalar usable as a filtration value.
pub trait Scalar: Copy + PartialOrd + Signed + Debug + Send + Sync + 'static {}

impl<T> Scalar for T where T: Copy + PartialOrd + Signed + Debug + Send + Sync + 'static {}

/// Floating-point scalar used for kernels, losses and data.
pub trait Real:
    Scalar
    + Float
    + FromPrimitive
    + ToPrimitive
    + Display
    + FromStr
    + Default
    + Serialize
    + DeserializeOwned
    + std::iter::Sum
{
    /// Lossy conversion from an `f64` constant.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Compares two filtration values, panicking on NaN.
#[inline]
pub(crate) fn cmp_values<T: PartialOrd + Debug>(a: &T, b: &T) -> std::cmp::Ordering {
    a.partial_cmp(b)
        .unwrap_or_else(|| panic!("unordered filtration values {a:?} and {b:?}"))
}

/// Sign class under the convention that an exact zero sits on the positive side.
#[inline]
pub fn is_negative<T: Scalar>(v: T) -> bool {
    v < T::zero()
}
