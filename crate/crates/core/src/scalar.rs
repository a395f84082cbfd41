//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};

/// Floating point type the algorithms are generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into `Self`.
    fn c(v: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    fn from_usize_lossy(v: usize) -> Self {
        Self::c(v as f64)
    }

    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform draw on the open interval (0, 1).
    fn sample_open01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform draw on [lo, hi).
    fn sample_uniform<R: Rng + ?Sized>(rng: &mut R, lo: Self, hi: Self) -> Self {
        lo + (hi - lo) * Self::sample_open01(rng)
    }
}

impl Real for f64 {
    #[inline]
    fn c(v: f64) -> Self {
        v
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }

    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn sample_open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Open01.sample(rng)
    }
}

impl Real for f32 {
    #[inline]
    fn c(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }

    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn sample_open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Open01.sample(rng)
    }
}

/// Numerically careful `log(mean(exp(v)))`.
///
/// Terms are summed in descending order so the result does not depend on the
/// order of `v`, and a vector of identical entries returns that entry exactly.
pub fn log_mean_exp<T: Real>(v: &[T]) -> T {
    if v.is_empty() {
        return T::neg_infinity();
    }
    let mut sorted: Vec<T> = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let m = sorted[0];
    if !m.is_finite() {
        return m;
    }
    let mut s = T::zero();
    for &x in &sorted {
        s += (x - m).exp();
    }
    let n = T::from_usize_lossy(v.len());
    if s == n {
        return m;
    }
    m + (s / n).ln()
}

/// Mean and standard error of the mean.
pub fn mean_and_stderr<T: Real>(v: &[T]) -> (T, T) {
    let n = v.len();
    if n == 0 {
        return (T::nan(), T::nan());
    }
    let nt = T::from_usize_lossy(n);
    let mean = pairwise_sum(v) / nt;
    if n < 2 {
        return (mean, T::zero());
    }
    let dev: Vec<T> = v.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / T::from_usize_lossy(n - 1);
    (mean, (var / nt).sqrt())
}

/// Pairwise summation with a fixed split so results are reproducible.
pub fn pairwise_sum<T: Real>(v: &[T]) -> T {
    if v.len() <= 16 {
        let mut s = T::zero();
        for &x in v {
            s += x;
        }
        return s;
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}
