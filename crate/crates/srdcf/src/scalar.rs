//! Scalar abstraction: all core math is generic over `f32`/`f64`.

use num_traits::{Float, FloatConst, NumAssign};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Real scalar type the library is generic over.
///
/// `rustfft::FftNum` restricts this to `f32` and `f64` in practice.
pub trait Scalar:
    Float + FloatConst + NumAssign + Sum + rustfft::FftNum + Debug + Display + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + NumAssign
        + Sum
        + rustfft::FftNum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Lossy cast from `f64` into the working scalar.
#[inline]
pub fn cast<T: Scalar>(x: f64) -> T {
    T::from(x).expect("f64 -> scalar cast")
}
