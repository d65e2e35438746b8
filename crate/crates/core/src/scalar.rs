//! Floating-point abstraction shared by every numeric routine in the crate.
//!
//! Everything numeric is generic over [`Scalar`]; the crate root re-exports
//! `f64` aliases because gradient verification needs double precision.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar usable by the encoder, the losses and the statistics.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only for types that cannot hold it.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn half() -> Self {
        Self::lit(0.5)
    }

    fn two() -> Self {
        Self::lit(2.0)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
