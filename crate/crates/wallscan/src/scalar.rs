//! Scalar abstraction so the whole library works with `f32` or `f64`.
//!
//! Everything downstream takes a single `S: Real` parameter. Concrete
//! aliases for the common `f64` instantiation live at the crate root.

use nalgebra::RealField;
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating scalar used throughout the library.
///
/// `Float` supplies the elementary operations, `RealField` what the linear
/// algebra needs. Both traits expose methods with the same names (`abs`,
/// `sqrt`, ...), so generic code qualifies calls as `Float::abs(x)`.
pub trait Real: Float + FromPrimitive + ToPrimitive + RealField + Default + 'static {}

impl<T> Real for T where T: Float + FromPrimitive + ToPrimitive + RealField + Default + 'static {}

/// Converts an `f64` constant to the scalar type.
#[inline]
pub fn cast<S: Real>(v: f64) -> S {
    S::from_f64(v).expect("finite f64 converts to any supported scalar")
}

/// Converts a scalar to `f64`; exact for the supported types.
#[inline]
pub fn to_f64<S: Real>(v: S) -> f64 {
    v.to_f64().expect("supported scalars convert to f64")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn casts_round_trip() {
        let x: f64 = 1.5e-3;
        let y: f32 = cast(x);
        assert_eq!(y, 0.0015f32);
        assert_eq!(to_f64(cast::<f64>(x)), x);
    }
}
