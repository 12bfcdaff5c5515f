//! Scalar abstraction for the numeric kernels.
//!
//! Angle arithmetic, dynamic-time-warping tables, and apportionment are
//! written against this trait so they work for `f32` and `f64` alike. The
//! domain layer instantiates everything at [`crate::Real`].

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable by the numeric kernels.
pub trait Scalar: Float + FromPrimitive + AddAssign + Sum + Debug {}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Lossless lift of small integer constants (degrees, counts).
pub fn lit<S: Scalar>(v: u32) -> S {
    S::from_u32(v).expect("small integer fits any float")
}
