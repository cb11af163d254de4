//! Scalar abstraction: the whole library is generic over the working
//! floating-point type (`f32` or `f64`).

use nalgebra::{Complex, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar the library is generic over.
///
/// `f32` and `f64` implement this automatically; tolerances are stated in
/// `f64` and converted on use.
pub trait Real: RealField + FromPrimitive + ToPrimitive + Copy {}

impl<T> Real for T where T: RealField + FromPrimitive + ToPrimitive + Copy {}

/// Complex number over the working scalar.
pub type C<T> = Complex<T>;

/// Convert an `f64` literal into the working scalar.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("finite literal representable in the working scalar")
}

/// Complex constant from `f64` parts.
#[inline]
pub fn cplx<T: Real>(re: f64, im: f64) -> C<T> {
    Complex::new(real(re), real(im))
}

/// Lift a real scalar into the complex plane.
#[inline]
pub fn lift<T: Real>(x: T) -> C<T> {
    Complex::new(x, T::zero())
}

/// Purely imaginary unit times a real scalar.
#[inline]
pub fn imag<T: Real>(x: T) -> C<T> {
    Complex::new(T::zero(), x)
}
