//! Floating-point scalar abstraction.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps};

/// Floating-point scalar, `f32` or `f64`.
///
/// Every numeric kernel in the crate is generic over this trait so the same
/// layer and DSP code can run in `f32` for training and in `f64` where
/// precision is the point (finite-difference gradient checks, spectral
/// round trips).
pub trait Scalar:
    Float + FromPrimitive + NumAssignOps + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Conversion from `f64`, for literals and precomputed constants.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 literal")
    }

    /// Conversion from a count, for means and variances.
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize fits scalar")
    }

    fn to64(self) -> f64 {
        self.to_f64().expect("scalar widens to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
