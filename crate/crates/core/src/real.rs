//! Scalar abstraction shared by every numerical module.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};

/// Floating point type the solver is generic over.
///
/// Implemented for `f32` and `f64`. The FFT bound comes from the spectral
/// collision operator, which transforms velocity slices in the same precision
/// as the rest of the state.
pub trait Real:
    'static
    + Copy
    + Send
    + Sync
    + Default
    + Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + LowerExp
    + rustfft::FftNum
{
    /// Converts an `f64` literal. Never fails for the supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// True when every entry is finite; otherwise the index of the first offender.
pub fn first_non_finite<R: Real>(values: &[R]) -> Option<usize> {
    values.iter().position(|v| !v.is_finite())
}
