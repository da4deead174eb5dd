//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All functionals (ρ, σ, width, breadth, witnesses, entropy bounds) are
//! generic over [`Real`], which is implemented for `f32` and `f64`. Exact
//! quantities such as pattern weights use `BigRational` instead.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for literal constants.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    /// `log2(1 - x)` without cancellation for small `x`.
    fn log2_1m(self) -> Self {
        (-self).ln_1p() / Self::ln2()
    }

    /// `2^(-x)`.
    fn exp2_neg(self) -> Self {
        (-self).exp2()
    }

    fn ln2() -> Self;
}

impl Real for f32 {
    fn ln2() -> Self {
        std::f32::consts::LN_2
    }
}

impl Real for f64 {
    fn ln2() -> Self {
        std::f64::consts::LN_2
    }
}

/// `log2(k)` for an alphabet size.
pub fn log2_alphabet<T: Real>(k: u8) -> T {
    T::from_u8(k).expect("alphabet size").log2()
}

/// Neumaier (improved Kahan) compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    compensation: T,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            compensation: T::zero(),
        }
    }

    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if !t.is_finite() {
            self.sum = t;
            return;
        }
        if self.sum.abs() >= x.abs() {
            self.compensation = self.compensation + ((self.sum - t) + x);
        } else {
            self.compensation = self.compensation + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        if self.sum.is_finite() {
            self.sum + self.compensation
        } else {
            self.sum
        }
    }
}

impl<T: Real> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum<T: Real, I: IntoIterator<Item = T>>(iter: I) -> T {
    iter.into_iter().collect::<CompensatedSum<T>>().value()
}

/// Bisection on a predicate that is `true` on `[lo, root)` and `false` on
/// `[root, hi]` (or the reverse, see `lower_holds`).
///
/// Returns the final bracket `(lo, hi)` with `hi - lo <= tol`, where
/// `pred(lo) == lower_holds` and `pred(hi) != lower_holds`.
pub fn bisect<T: Real, P: FnMut(T) -> bool>(
    mut lo: T,
    mut hi: T,
    tol: T,
    lower_holds: bool,
    mut pred: P,
) -> (T, T) {
    let two = T::lit(2.0);
    // Hard cap so a NaN tolerance can never spin forever.
    for _ in 0..2048 {
        if hi - lo <= tol {
            break;
        }
        let mid = lo + (hi - lo) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) == lower_holds {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}
