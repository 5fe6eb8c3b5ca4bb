//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the simulators, planner and learner are written against.
///
/// Implemented for `f32` and `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only if the value is unrepresentable,
    /// which cannot happen for the finite constants used in this crate.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Euclidean norm of `a - b`, optionally with per-dimension weights.
pub fn weighted_distance<S: Scalar>(a: &[S], b: &[S], weights: Option<&[S]>) -> S {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = S::zero();
    match weights {
        Some(w) => {
            for ((x, y), w) in a.iter().zip(b).zip(w) {
                let d = (*x - *y) * *w;
                acc += d * d;
            }
        }
        None => {
            for (x, y) in a.iter().zip(b) {
                let d = *x - *y;
                acc += d * d;
            }
        }
    }
    acc.sqrt()
}
