// Copyright 2026 qfr contributors
// SPDX-License-Identifier: Apache-2.0

//! The real scalar type underlying all complex arithmetic in this crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar over which the whole crate is generic.
///
/// In practice this is `f32` or `f64`; the shipped models and the CLI run at
/// `f64` (see the aliases at the crate root). The default [`Tolerances`]
/// values are calibrated for `f64`.
///
/// [`Tolerances`]: crate::Tolerances
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into the generic scalar.
///
/// Panics if the value is not representable, which cannot happen for the
/// finite constants this crate uses.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant must convert into the scalar type")
}
