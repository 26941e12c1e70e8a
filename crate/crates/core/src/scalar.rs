use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    fn from_int(n: i64) -> Self {
        Self::from_i64(n).expect("integer representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type C<S> = Complex<S>;

pub(crate) fn cz<S: Scalar>() -> C<S> {
    Complex::new(S::zero(), S::zero())
}

pub(crate) fn cr<S: Scalar>(x: S) -> C<S> {
    Complex::new(x, S::zero())
}

/// Multiplication by `i`.
pub(crate) fn ci<S: Scalar>(z: C<S>) -> C<S> {
    Complex::new(-z.im, z.re)
}
