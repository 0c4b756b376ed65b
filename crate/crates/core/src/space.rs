//! The ambient coordinate space: a finite-dimensional stand-in for the state
//! space of a process, together with the two geometries everything else uses.
//!
//! * A [`BanachDisk`] `K` with per-coordinate radii `k_i`. Its gauge
//!   `‖x‖_K = max_i |x_i| / k_i` is the Minkowski functional of
//!   `K = {x : |x_i| ≤ k_i}`: the smallest `ρ > 0` with `x ∈ ρK`.
//! * A weak (coordinatewise) metric `d(x, y) = Σ_i w_i · min(1, |x_i − y_i|)`
//!   with summable positive weights. It is translation invariant and bounded
//!   by `Σ w_i ≤ 1`, and two points agree iff all coordinates agree.
//!
//! The disk induces the shell partition used throughout the jump machinery:
//! shell 0 is the exterior of `K`, and shell `n ≥ 1` is the set where
//! `1/(n+1) < ‖x‖_K ≤ 1/n` (left-open, right-closed).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Index into the shell partition of the ambient space.
///
/// `0` is the residual shell outside the disk; `n ≥ 1` means
/// `1/(n+1) < ‖x‖_K ≤ 1/n`.
pub type ShellIndex = u32;

/// Dimension plus the weights of the separating functionals that define the
/// weak metric.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceModel<T> {
    dim: usize,
    functional_weights: Vec<T>,
}

impl<T: Scalar> SpaceModel<T> {
    /// Weights default to the geometric sequence `2^{-(i+1)}`, which already
    /// sums below one.
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("space dimension must be ≥ 1".into()));
        }
        let half = T::from_f64_lossy(0.5);
        let mut w = Vec::with_capacity(dim);
        let mut cur = half;
        for _ in 0..dim {
            w.push(cur);
            cur = cur * half;
        }
        Ok(SpaceModel { dim, functional_weights: w })
    }

    /// Explicit weights; they must be strictly positive and are rescaled to
    /// sum to at most one (the metric only ever needs summability, and the
    /// unit bound makes oscillation tolerances comparable across models).
    pub fn with_weights(dim: usize, weights: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("space dimension must be ≥ 1".into()));
        }
        if weights.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: weights.len() });
        }
        if weights.iter().any(|&w| !(w > T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidParameter("functional weights must be positive and finite".into()));
        }
        let total: T = weights.iter().copied().sum();
        let weights = if total > T::one() {
            weights.into_iter().map(|w| w / total).collect()
        } else {
            weights
        };
        Ok(SpaceModel { dim, functional_weights: weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn functional_weights(&self) -> &[T] {
        &self.functional_weights
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    /// Weak coordinatewise metric `Σ_i w_i · min(1, |x_i − y_i|)`.
    pub fn weak_distance(&self, x: &[T], y: &[T]) -> Result<T> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        let one = T::one();
        Ok(self
            .functional_weights
            .iter()
            .zip(x.iter().zip(y))
            .map(|(&w, (&a, &b))| w * (a - b).abs().min(one))
            .sum())
    }
}

/// Axis-aligned closed disk `K = {x : |x_i| ≤ k_i for all i}` with strictly
/// positive radii. Bounded, convex, symmetric — a Banach disk whose span is
/// the whole space.
#[derive(Debug, Clone, PartialEq)]
pub struct BanachDisk<T> {
    radii: Vec<T>,
}

impl<T: Scalar> BanachDisk<T> {
    pub fn new(radii: Vec<T>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::InvalidParameter("disk needs at least one radius".into()));
        }
        if radii.iter().any(|&k| !(k > T::zero()) || !k.is_finite()) {
            return Err(Error::InvalidParameter("disk radii must be positive and finite".into()));
        }
        Ok(BanachDisk { radii })
    }

    /// Unit disk in the given dimension.
    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(vec![T::one(); dim])
    }

    pub fn dim(&self) -> usize {
        self.radii.len()
    }

    pub fn radii(&self) -> &[T] {
        &self.radii
    }

    /// Gauge (Minkowski functional) of the disk: `max_i |x_i| / k_i`.
    /// Zero exactly at the origin; `≤ 1` exactly on `K`.
    pub fn gauge_norm(&self, x: &[T]) -> Result<T> {
        if x.len() != self.radii.len() {
            return Err(Error::DimensionMismatch { expected: self.radii.len(), got: x.len() });
        }
        Ok(x.iter()
            .zip(&self.radii)
            .map(|(&xi, &ki)| xi.abs() / ki)
            .fold(T::zero(), T::max))
    }

    /// Dual bound `sup_{x ∈ K} ⟨x, a⟩ = Σ_i k_i |a_i|`, so that
    /// `|⟨x, a⟩| ≤ ‖x‖_K · dual_bound(a)` for every `x`.
    pub fn dual_bound(&self, a: &[T]) -> Result<T> {
        if a.len() != self.radii.len() {
            return Err(Error::DimensionMismatch { expected: self.radii.len(), got: a.len() });
        }
        Ok(a.iter().zip(&self.radii).map(|(&ai, &ki)| ki * ai.abs()).sum())
    }

    /// Whether `x ∈ m·K`, i.e. `‖x‖_K ≤ m`.
    pub fn contains_scaled(&self, x: &[T], m: T) -> Result<bool> {
        Ok(self.gauge_norm(x)? <= m)
    }

    /// Shell index of a nonzero point: `0` outside the disk, otherwise the
    /// unique `n ≥ 1` with `1/(n+1) < ‖x‖_K ≤ 1/n`.
    ///
    /// The zero vector lies in every scaled copy of the disk and has no
    /// shell; asking for one is an error.
    pub fn shell_index(&self, x: &[T]) -> Result<ShellIndex> {
        let g = self.gauge_norm(x)?;
        if g == T::zero() {
            return Err(Error::ZeroVector);
        }
        Ok(shell_of_gauge(g))
    }
}

/// Shell index of a strictly positive gauge value.
///
/// Computed as `⌊1/g⌋` and then nudged across the two adjacent boundaries,
/// so that the left-open/right-closed convention holds exactly even when the
/// division rounds: `g = 1/n` lands in shell `n`, `g = 1/(n+1)` in `n + 1`.
pub fn shell_of_gauge<T: Scalar>(g: T) -> ShellIndex {
    debug_assert!(g > T::zero());
    let one = T::one();
    if g > one {
        return 0;
    }
    let mut n = match (one / g).floor().to_u32() {
        Some(n) => n.max(1),
        // 1/g overflowed u32: deeper than any shell this library ever
        // populates; saturate.
        None => return u32::MAX,
    };
    // Invariant to enforce: 1/(n+1) < g ≤ 1/n, i.e. n·g ≤ 1 < (n+1)·g.
    while T::from_u32(n).map_or(false, |nf| nf * g > one) {
        n -= 1;
    }
    while T::from_u32(n + 1).map_or(false, |nf| nf * g <= one) {
        n += 1;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn disk3() -> BanachDisk<f64> {
        BanachDisk::new(vec![1.0, 2.0, 0.5]).unwrap()
    }

    #[test]
    fn gauge_of_origin_is_zero() {
        assert_eq!(disk3().gauge_norm(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn gauge_on_boundary_is_exactly_one() {
        // x = (k_1, 0, 0) sits on the face of the disk.
        assert_eq!(disk3().gauge_norm(&[1.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(disk3().gauge_norm(&[0.0, 2.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn gauge_is_weighted_sup() {
        // |x_i|/k_i = (0.5, 0.25, 3.0) → max 3.0
        let g = disk3().gauge_norm(&[0.5, 0.5, 1.5]).unwrap();
        assert_eq!(g, 3.0);
    }

    #[test]
    fn shell_index_of_zero_vector_errors() {
        assert!(matches!(disk3().shell_index(&[0.0; 3]), Err(Error::ZeroVector)));
    }

    #[test]
    fn shell_boundaries_are_right_closed() {
        let k = BanachDisk::new(vec![1.0]).unwrap();
        // gauge exactly 1/n belongs to shell n
        assert_eq!(k.shell_index(&[1.0]).unwrap(), 1);
        assert_eq!(k.shell_index(&[0.5]).unwrap(), 2);
        assert_eq!(k.shell_index(&[0.25]).unwrap(), 4);
        // just outside the disk
        assert_eq!(k.shell_index(&[1.0 + 1e-12]).unwrap(), 0);
        // interior of shell 1: (1/2, 1)
        assert_eq!(k.shell_index(&[0.75]).unwrap(), 1);
        // gauge 1/3 → shell 3; a hair above 1/3 → shell 2
        assert_eq!(k.shell_index(&[1.0 / 3.0]).unwrap(), 3);
        assert_eq!(k.shell_index(&[1.0 / 3.0 + 1e-12]).unwrap(), 2);
    }

    #[test]
    fn shell_index_respects_disk_radii() {
        // gauge of (0.0, 0.9, 0.0) under radii (1,2,0.5) is 0.45 → shell 2.
        assert_eq!(disk3().shell_index(&[0.0, 0.9, 0.0]).unwrap(), 2);
    }

    #[test]
    fn dual_bound_dominates_pairing() {
        let k = disk3();
        let a = [0.3, -1.1, 2.0];
        let x = [0.4, -0.8, 0.1];
        let pairing: f64 = x.iter().zip(a.iter()).map(|(xi, ai)| xi * ai).sum();
        let bound = k.gauge_norm(&x).unwrap() * k.dual_bound(&a).unwrap();
        assert!(pairing.abs() <= bound + 1e-15);
    }

    #[test]
    fn default_weights_are_geometric_and_summable() {
        let m = SpaceModel::<f64>::new(4).unwrap();
        assert_eq!(m.functional_weights(), &[0.5, 0.25, 0.125, 0.0625]);
        let total: f64 = m.functional_weights().iter().sum();
        assert!(total <= 1.0);
    }

    #[test]
    fn oversized_weights_are_normalized() {
        let m = SpaceModel::with_weights(2, vec![3.0, 1.0]).unwrap();
        let total: f64 = m.functional_weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert_eq!(m.functional_weights()[0], 0.75);
    }

    #[test]
    fn weak_distance_examples() {
        let m = SpaceModel::<f64>::with_weights(2, vec![0.5, 0.25]).unwrap();
        // coordinates differing by ≥ 1 saturate at the weight
        let d = m.weak_distance(&[0.0, 0.0], &[5.0, 0.5]).unwrap();
        assert!((d - (0.5 * 1.0 + 0.25 * 0.5)).abs() < 1e-15);
        // identical points at distance zero
        assert_eq!(m.weak_distance(&[1.0, -2.0], &[1.0, -2.0]).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        assert!(matches!(
            disk3().gauge_norm(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
        let m = SpaceModel::<f64>::new(2).unwrap();
        assert!(m.weak_distance(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn works_at_f32() {
        let k = BanachDisk::<f32>::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(k.gauge_norm(&[0.5, 1.0]).unwrap(), 0.5);
        assert_eq!(k.shell_index(&[0.5, 1.0]).unwrap(), 2);
    }

    proptest! {
        #[test]
        fn gauge_is_absolutely_homogeneous(
            x in proptest::collection::vec(-100.0f64..100.0, 3),
            c in -50.0f64..50.0,
        ) {
            let k = disk3();
            let cx: Vec<f64> = x.iter().map(|v| v * c).collect();
            let lhs = k.gauge_norm(&cx).unwrap();
            let rhs = c.abs() * k.gauge_norm(&x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
        }

        #[test]
        fn gauge_satisfies_triangle_inequality(
            x in proptest::collection::vec(-100.0f64..100.0, 3),
            y in proptest::collection::vec(-100.0f64..100.0, 3),
        ) {
            let k = disk3();
            let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let lhs = k.gauge_norm(&sum).unwrap();
            let rhs = k.gauge_norm(&x).unwrap() + k.gauge_norm(&y).unwrap();
            prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs));
        }

        #[test]
        fn every_nonzero_point_lies_in_its_shell(
            x in proptest::collection::vec(-10.0f64..10.0, 3),
        ) {
            let k = disk3();
            let g = k.gauge_norm(&x).unwrap();
            prop_assume!(g > 0.0);
            let n = k.shell_index(&x).unwrap();
            if n == 0 {
                prop_assert!(g > 1.0);
            } else {
                // membership in the half-open gauge interval, exactly
                prop_assert!(n as f64 * g <= 1.0);
                prop_assert!((n + 1) as f64 * g > 1.0);
            }
        }

        #[test]
        fn weak_distance_is_a_bounded_metric(
            x in proptest::collection::vec(-30.0f64..30.0, 3),
            y in proptest::collection::vec(-30.0f64..30.0, 3),
            z in proptest::collection::vec(-30.0f64..30.0, 3),
        ) {
            let m = SpaceModel::<f64>::new(3).unwrap();
            let dxy = m.weak_distance(&x, &y).unwrap();
            let dyx = m.weak_distance(&y, &x).unwrap();
            prop_assert_eq!(dxy, dyx);
            prop_assert!(dxy <= 1.0);
            prop_assert!(dxy >= 0.0);
            if x == y {
                prop_assert_eq!(dxy, 0.0);
            }
            let dxz = m.weak_distance(&x, &z).unwrap();
            let dzy = m.weak_distance(&z, &y).unwrap();
            prop_assert!(dxy <= dxz + dzy + 1e-12);
        }
    }
}
