//! Scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the solver core is generic over (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal; every supported type can represent (or round) it.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Relative tolerance floor: `rel` for f64, raised to a few ulps for narrower types.
    fn rel_tol(rel: f64) -> Self {
        Self::lit(rel).max(Self::epsilon() * Self::lit(64.0))
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
