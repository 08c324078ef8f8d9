//! Scalar abstraction for the real-valued parts of the engine (scores,
//! concordance fractions, entropies and the generative review model).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

/// floating point: f32 or f64
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Draw from N(0, 1).
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw from ChiSquared(df); `df` must be positive.
    fn chi_squared<R: Rng + ?Sized>(df: Self, rng: &mut R) -> Self;

    /// Lossless for the integer magnitudes used here (counts well below 2^24).
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as a float")
    }

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable as a float")
    }
}

impl Scalar for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn chi_squared<R: Rng + ?Sized>(df: Self, rng: &mut R) -> Self {
        ChiSquared::new(df).expect("positive degrees of freedom").sample(rng)
    }
}

impl Scalar for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn chi_squared<R: Rng + ?Sized>(df: Self, rng: &mut R) -> Self {
        ChiSquared::new(df).expect("positive degrees of freedom").sample(rng)
    }
}
