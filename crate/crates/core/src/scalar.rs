use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the numerical core is written against.
///
/// The tolerances are absolute thresholds tuned to the precision of the
/// underlying float; everything that compares against "zero within
/// tolerance" goes through them so `f32` builds behave sensibly.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Jacobi stops once the off-diagonal Frobenius mass falls below this
    /// (scaled by `max(1, ‖A‖_F)`).
    const EIG_TOL: f64;
    /// Largest `‖M − M†‖_F` accepted as "Hermitian up to rounding".
    const HERMITIAN_TOL: f64;
    /// Unit-norm / idempotence / orthogonality checks on constructed objects.
    const UNIT_TOL: f64;

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl Scalar for f64 {
    const EIG_TOL: f64 = 1e-12;
    const HERMITIAN_TOL: f64 = 1e-10;
    const UNIT_TOL: f64 = 1e-12;
}

impl Scalar for f32 {
    const EIG_TOL: f64 = 1e-6;
    const HERMITIAN_TOL: f64 = 1e-4;
    const UNIT_TOL: f64 = 1e-5;
}

pub type C<T> = Complex<T>;

#[inline]
pub fn c<T: Scalar>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::lit(im))
}

#[inline]
pub fn cr<T: Scalar>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}
