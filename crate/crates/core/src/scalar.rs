//! Scalar abstraction: the one bound every numeric routine in the crate uses.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Real scalar type the crate's numerics are generic over.
///
/// `RealField` supplies field arithmetic plus the elementary functions
/// (`sqrt`, `exp`, `cos`, ...) and makes `Complex<Self>` usable with the
/// dense eigensolvers; the primitive-conversion traits handle literals and
/// serialization. Implemented for `f32` and `f64`.
pub trait Scalar:
    RealField + Copy + Default + FromPrimitive + ToPrimitive + Serialize + DeserializeOwned
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shorthand for converting an `f64` constant into the working scalar type.
#[inline]
pub fn fp<F: Scalar>(v: f64) -> F {
    F::from_f64(v).expect("constant representable in scalar type")
}
