use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point type used for entropies and dimension estimates.
///
/// Counts and probabilities stay exact; a `Scalar` only appears once a
/// logarithm is taken.
pub trait Scalar: Float + FromPrimitive + NumAssign + Debug + Default + Send + Sync + 'static {
    fn from_count(v: u64) -> Self {
        <Self as FromPrimitive>::from_u64(v).expect("u64 is representable")
    }

    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 is representable")
    }

    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
