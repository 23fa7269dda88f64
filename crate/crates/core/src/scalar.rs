//! Scalar abstractions.
//!
//! Box construction and the linear checks on boxes only need field arithmetic,
//! so they work over [`Scalar`], which includes exact rationals. Anything that
//! takes logarithms, square roots or eigendecompositions requires [`Real`].

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, Num, Signed, ToPrimitive};

/// Field-like scalar usable for probability tables.
pub trait Scalar:
    Num
    + Signed
    + Copy
    + PartialOrd
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion of a literal; panics only if `T` cannot represent finite doubles.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("scalar type cannot represent a finite f64")
    }

    fn from_count(v: usize) -> Self {
        Self::from_usize(v).expect("scalar type cannot represent a count")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Num
        + Signed
        + Copy
        + PartialOrd
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Floating-point scalar (`f32`, `f64`).
pub trait Real: Scalar + Float + FloatConst {}

impl<T> Real for T where T: Scalar + Float + FloatConst {}
