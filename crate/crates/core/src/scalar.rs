//! Scalar abstraction for the floating-point kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar accepted by the Laplacian operators and eigensolvers: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Residual tolerance that the dense eigensolver can be expected to reach.
    fn dense_tolerance() -> Self;

    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    fn dense_tolerance() -> Self {
        1e-4
    }
}

impl Scalar for f64 {
    fn dense_tolerance() -> Self {
        1e-10
    }
}
