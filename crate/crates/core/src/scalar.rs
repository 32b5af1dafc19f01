//! Floating-point abstraction shared by every estimator.
//!
//! All numerical code in this crate is generic over [`Scalar`], which is
//! implemented for `f32` and `f64`. Special functions (normal CDF and its
//! inverse) are evaluated in double precision and converted back.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use statrs::distribution::{ContinuousCDF, Normal};

/// floating point: f32 or f64
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal or intermediate into `Self`.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    /// Lossy conversion to `f64`.
    fn f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Standard normal cumulative distribution function.
pub fn norm_cdf<T: Scalar>(x: T) -> T {
    T::of(0.5 * libm::erfc(-x.f64() / std::f64::consts::SQRT_2))
}

/// Upper tail `1 - Φ(x)` without cancellation.
pub fn norm_sf<T: Scalar>(x: T) -> T {
    T::of(0.5 * libm::erfc(x.f64() / std::f64::consts::SQRT_2))
}

/// Inverse of the standard normal CDF; `p` must lie in (0, 1).
pub fn norm_ppf<T: Scalar>(p: T) -> T {
    let std = Normal::standard();
    T::of(std.inverse_cdf(p.f64()))
}

/// Standard normal density.
pub fn norm_pdf<T: Scalar>(x: T) -> T {
    let half = T::of(0.5);
    (-half * x * x).exp() / (T::TAU()).sqrt()
}

/// Upper quartile of the standard normal, Φ⁻¹(0.75).
pub fn quartile_z<T: Scalar>() -> T {
    T::of(0.674_489_750_196_081_7)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_symmetry_and_inverse() {
        for &x in &[-6.0, -2.5, -0.3, 0.0, 0.7, 3.1] {
            let p: f64 = norm_cdf(x);
            assert!((p + norm_cdf(-x) - 1.0).abs() < 1e-15);
            assert!((norm_ppf(p) - x).abs() < 1e-9, "x={x}");
            assert!((norm_sf(x) - norm_cdf(-x)).abs() < 1e-16);
        }
        assert!((norm_ppf(0.75f64) - quartile_z::<f64>()).abs() < 1e-14);
    }

    #[test]
    fn works_in_single_precision() {
        let p: f32 = norm_cdf(1.0f32);
        assert!((p - 0.841_344_7).abs() < 1e-6);
        assert!((norm_pdf(0.0f32) - 0.398_942_3).abs() < 1e-6);
    }
}
