//! Scalar abstraction: every quantity in the library is generic over a
//! floating-point type implementing [`Scalar`].
//!
//! `f64` is the type the statistical machinery is calibrated for (all the
//! documented tolerances assume 53-bit mantissas); `f32` is supported for the
//! deterministic geometry/measure layer and for quick smoke runs.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::distr::uniform::SampleUniform;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + SampleUniform
    + Sum
    + Display
    + Debug
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Draw one standard normal variate.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Conversion from `f64`, used for tolerance constants and literals.
    /// Panics only for values outside the target type's range, which the
    /// library never produces.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl Scalar for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Scalar for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_literals() {
        assert_eq!(f64::from_f64_lossy(0.25), 0.25);
        assert_eq!(f32::from_f64_lossy(0.25), 0.25f32);
        assert_eq!(0.25f64.to_f64_lossy(), 0.25);
    }

    #[test]
    fn normals_have_roughly_unit_scale() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mean: f64 = (0..4000).map(|_| f64::standard_normal(&mut rng)).sum::<f64>() / 4000.0;
        assert!(mean.abs() < 0.1, "sample mean {mean} too far from 0");
    }
}
