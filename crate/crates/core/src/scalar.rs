//! Scalar abstraction for the numeric core.
//!
//! Everything numerical in this crate is generic over [`Float`], so the same
//! solvers run in `f32` or `f64`. The concrete aliases exported from the crate
//! root pin `f64`, which is what the CLI and the experiment tolerances assume.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Floating-point scalar usable by the solvers and simulators.
pub trait Float:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from `f64`; panics only for exotic types.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant not representable in scalar type")
    }

    /// Conversion to `f64` for reporting and RNG interop.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }

    /// A tolerance that honors `base` in `f64` but widens for coarser types,
    /// so the same checks stay meaningful in `f32`.
    fn spec_tol(base: f64) -> Self {
        Self::of(base).max(Self::epsilon() * Self::of(64.0))
    }
}

impl Float for f32 {}
impl Float for f64 {}
