use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the statistics are computed in: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite conversion")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("finite conversion")
    }

    #[inline]
    fn of_f32(x: f32) -> Self {
        Self::from_f32(x).expect("finite conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
