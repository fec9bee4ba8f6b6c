//! Floating-point scalar abstraction shared by the numeric core.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar type the model and optimizer are generic over (`f32` or `f64`).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Gauss error function.
    fn erf(self) -> Self;

    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable")
    }

    #[inline]
    fn to64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Type tag written into checkpoint headers.
    const NAME: &'static str;
}

impl Scalar for f64 {
    #[inline]
    fn erf(self) -> Self {
        libm::erf(self)
    }
    const NAME: &'static str = "f64";
}

impl Scalar for f32 {
    #[inline]
    fn erf(self) -> Self {
        libm::erff(self)
    }
    const NAME: &'static str = "f32";
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erf_symmetry_and_limits() {
        assert_eq!(Scalar::erf(0.0f64), 0.0);
        assert_eq!(Scalar::erf(-0.5f64), -Scalar::erf(0.5f64));
        assert!((Scalar::erf(6.0f64) - 1.0).abs() < 1e-15);
        assert!((Scalar::erf(0.5f32) - Scalar::erf(0.5f64) as f32).abs() < 1e-6);
    }
}
