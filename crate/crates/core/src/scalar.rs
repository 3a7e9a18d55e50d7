use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

/// Floating point element type of the numerical core: `f32` or `f64`.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumCast
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; exact for `f64`.
    fn of(value: f64) -> Self {
        <Self as num_traits::NumCast>::from(value).expect("f64 is representable")
    }

    /// Widening conversion to `f64`; exact for both `f32` and `f64`.
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar widens to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Sums the terms in ascending value order so the result does not depend on
/// the order the terms were produced in.
pub fn canonical_sum<T: Scalar>(terms: &mut [T]) -> T {
    terms.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut acc = T::zero();
    for &t in terms.iter() {
        acc += t;
    }
    acc
}
