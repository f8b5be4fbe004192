//! Scalar abstraction for the analytic layers.
//!
//! Lattice sums, effective parameters and resonant-geometry design are written
//! once over [`Real`]; the finite-array solver and the memory integrators are
//! concrete `f64` code.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-for-`f64` conversion of literals and constants.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Wavenumber `k = 2π` in units where the wavelength is one.
    #[inline]
    fn wavenumber() -> Self {
        Self::TAU()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `e^{iθ}`.
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// `e^{iq}` for the two collective modes; exact ±1 instead of `cos(π)`.
#[inline]
pub fn mode_sign<T: Real>(pi_mode: bool) -> T {
    if pi_mode {
        -T::one()
    } else {
        T::one()
    }
}
