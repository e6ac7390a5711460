use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the solvers can run on.
///
/// The tolerances scale with the type's precision: the `f64` values are the
/// documented defaults, the `f32` ones are loosened to what single precision
/// can actually resolve.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Relative singular-value ratio `σ_min / σ_max` below which a coefficient
    /// matrix is rank deficient.
    fn rank_tolerance() -> Self;

    /// Absolute tolerance in metres for coincident stations and flat layouts.
    fn geometry_tolerance() -> Self;

    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Scalar for f64 {
    fn rank_tolerance() -> Self {
        1e-12
    }

    fn geometry_tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn rank_tolerance() -> Self {
        1e-6
    }

    fn geometry_tolerance() -> Self {
        1e-5
    }
}
