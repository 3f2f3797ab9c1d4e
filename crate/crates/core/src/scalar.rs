//! Scalar abstraction for the geometry, channel and bound computations.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

pub use nalgebra::Complex;

/// Real field usable by the generic parts of the crate (`f32`, `f64`).
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {}

impl<T> Real for T where T: RealField + Copy + FromPrimitive + ToPrimitive {}

/// Lossy conversion from an `f64` literal.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Squared modulus without the square root.
#[inline]
pub fn norm_sqr<T: Real>(z: Complex<T>) -> T {
    z.re * z.re + z.im * z.im
}

/// `exp(j*phi)` scaled by `mag`.
#[inline]
pub fn polar<T: Real>(mag: T, phi: T) -> Complex<T> {
    Complex::new(mag * phi.cos(), mag * phi.sin())
}
