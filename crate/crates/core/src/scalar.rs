//! Scalar abstraction shared by the numerical modules.

use nalgebra::ComplexField;
use num_complex::Complex;

/// Real scalar usable by the dense (nalgebra) and sparse (faer) kernels.
pub trait Real:
    nalgebra::RealField
    + faer::traits::RealField
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Copy
    + Send
    + Sync
{
    fn lit(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).unwrap()
    }

    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap()
    }

    /// Machine epsilon of the underlying type.
    fn eps() -> Self {
        <Self as faer::traits::RealField>::epsilon_impl()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `e^{iθ}`.
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(ComplexField::cos(theta), ComplexField::sin(theta))
}

pub fn cplx<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::lit(im))
}

pub fn norm_sqr<T: Real>(z: Complex<T>) -> T {
    z.re * z.re + z.im * z.im
}

pub fn abs<T: Real>(z: Complex<T>) -> T {
    ComplexField::sqrt(norm_sqr(z))
}

pub fn cexp<T: Real>(z: Complex<T>) -> Complex<T> {
    cis(z.im) * ComplexField::exp(z.re)
}

pub fn to_c64<T: Real>(z: Complex<T>) -> Complex<f64> {
    Complex::new(z.re.to_f64_lossy(), z.im.to_f64_lossy())
}

pub fn from_c64<T: Real>(z: Complex<f64>) -> Complex<T> {
    Complex::new(T::lit(z.re), T::lit(z.im))
}
