//! Small dense linear algebra for the d-dimensional coordinate space.
//!
//! Dimensions here are tiny (single digits at desk scale), so everything is
//! plain `Vec`-backed with no blocking or pivoting heroics. The only
//! nontrivial routine is a cyclic Jacobi eigensolver for symmetric matrices,
//! which is what the Gaussian covariance factorization rests on.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `⟨x, y⟩` with a length check in debug builds.
pub fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

pub fn add<T: Scalar>(x: &[T], y: &[T]) -> Vec<T> {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(&a, &b)| a + b).collect()
}

pub fn sub<T: Scalar>(x: &[T], y: &[T]) -> Vec<T> {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(&a, &b)| a - b).collect()
}

pub fn scale<T: Scalar>(x: &[T], c: T) -> Vec<T> {
    x.iter().map(|&a| a * c).collect()
}

/// `acc += c * x`, in place.
pub fn axpy<T: Scalar>(acc: &mut [T], c: T, x: &[T]) {
    debug_assert_eq!(acc.len(), x.len());
    for (a, &b) in acc.iter_mut().zip(x) {
        *a = *a + c * b;
    }
}

pub fn is_zero<T: Scalar>(x: &[T]) -> bool {
    x.iter().all(|&a| a == T::zero())
}

/// Sum by fixed-shape pairwise reduction: the result is independent of any
/// outer chunking and the rounding error grows like O(log n) instead of O(n).
pub fn pairwise_sum<T: Scalar>(v: &[T]) -> T {
    if v.len() <= 8 {
        v.iter().copied().fold(T::zero(), |a, b| a + b)
    } else {
        let mid = v.len() / 2;
        pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
    }
}

/// Dense square matrix, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> SquareMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        SquareMatrix { dim, data: vec![T::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(SquareMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.dim).map(|i| self.data[i * self.dim..(i + 1) * self.dim].to_vec()).collect()
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.dim);
        (0..self.dim).map(|i| dot(&self.data[i * self.dim..(i + 1) * self.dim], x)).collect()
    }

    /// `⟨Ax, y⟩`.
    pub fn bilinear(&self, x: &[T], y: &[T]) -> T {
        dot(&self.matvec(x), y)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for k in 0..self.dim {
                let aik = self[(i, k)];
                for j in 0..self.dim {
                    out[(i, j)] = out[(i, j)] + aik * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        SquareMatrix { dim: self.dim, data }
    }

    pub fn scale(&self, c: T) -> Self {
        SquareMatrix { dim: self.dim, data: self.data.iter().map(|&a| a * c).collect() }
    }

    /// Largest absolute asymmetry `max_{ij} |a_ij − a_ji|`.
    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
    }

    /// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
    ///
    /// Returns `(eigenvalues, V)` with the columns of `V` orthonormal and
    /// `A = V diag(λ) Vᵀ`. Converges quadratically; the sweep cap is far more
    /// than the handful of dimensions used here ever needs.
    pub fn symmetric_eigen(&self) -> (Vec<T>, SquareMatrix<T>) {
        let n = self.dim;
        let mut a = self.clone();
        let mut v = Self::identity(n);
        if n <= 1 {
            return ((0..n).map(|i| a[(i, i)]).collect(), v);
        }

        let eps = T::epsilon();
        for _sweep in 0..64 {
            let mut off = T::zero();
            for i in 0..n {
                for j in (i + 1)..n {
                    off = off + a[(i, j)] * a[(i, j)];
                }
            }
            let scale = a.max_abs().max(T::one());
            if off.sqrt() <= eps * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= eps * scale {
                        continue;
                    }
                    // Classical 2x2 rotation that annihilates a_pq.
                    let theta = (a[(q, q)] - a[(p, p)]) / (T::from_f64_lossy(2.0) * apq);
                    let t = {
                        let mag = theta.abs() + (theta * theta + T::one()).sqrt();
                        let t = T::one() / mag;
                        if theta < T::zero() {
                            -t
                        } else {
                            t
                        }
                    };
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;

                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        ((0..n).map(|i| a[(i, i)]).collect(), v)
    }
}

impl<T> std::ops::Index<(usize, usize)> for SquareMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.dim + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for SquareMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.dim + j]
    }
}

/// Nodes and weights of the 16-point Gauss–Legendre rule on `[-1, 1]`
/// (positive half; the rule is symmetric). Exact for polynomials of degree
/// ≤ 31; the quadrature unit tests pin that down.
const GL16_NODES: [f64; 8] = [
    0.095_012_509_837_637_440_185,
    0.281_603_550_779_258_913_230,
    0.458_016_777_657_227_386_342,
    0.617_876_244_402_643_748_447,
    0.755_404_408_355_003_033_895,
    0.865_631_202_387_831_743_880,
    0.944_575_023_073_232_576_078,
    0.989_400_934_991_649_932_596,
];
const GL16_WEIGHTS: [f64; 8] = [
    0.189_450_610_455_068_496_285,
    0.182_603_415_044_923_588_867,
    0.169_156_519_395_002_538_189,
    0.149_595_988_816_576_732_081,
    0.124_628_971_255_533_872_052,
    0.095_158_511_682_492_784_810,
    0.062_253_523_938_647_892_863,
    0.027_152_459_411_754_094_852,
];

/// ∫_a^b f(x) dx by 16-point Gauss–Legendre.
pub fn gauss_legendre_16<T: Scalar, F: Fn(T) -> T>(a: T, b: T, f: F) -> T {
    let half = T::from_f64_lossy(0.5);
    let mid = (a + b) * half;
    let rad = (b - a) * half;
    let mut acc = T::zero();
    for k in 0..8 {
        let x = T::from_f64_lossy(GL16_NODES[k]) * rad;
        let w = T::from_f64_lossy(GL16_WEIGHTS[k]);
        acc = acc + w * (f(mid + x) + f(mid - x));
    }
    acc * rad
}

/// Same rule for complex-valued integrands over a real interval.
pub fn gauss_legendre_16_complex<T: Scalar, F>(a: T, b: T, f: F) -> num_complex::Complex<T>
where
    F: Fn(T) -> num_complex::Complex<T>,
{
    let half = T::from_f64_lossy(0.5);
    let mid = (a + b) * half;
    let rad = (b - a) * half;
    let mut acc = num_complex::Complex::new(T::zero(), T::zero());
    for k in 0..8 {
        let x = T::from_f64_lossy(GL16_NODES[k]) * rad;
        let w = T::from_f64_lossy(GL16_WEIGHTS[k]);
        acc = acc + (f(mid + x) + f(mid - x)) * w;
    }
    acc * rad
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Float;

    #[test]
    fn dot_and_axpy() {
        let x = vec![1.0, 2.0, 3.0];
        let y = vec![-1.0, 0.5, 2.0];
        assert_eq!(dot(&x, &y), -1.0 + 1.0 + 6.0);
        let mut acc = vec![0.0; 3];
        axpy(&mut acc, 2.0, &x);
        assert_eq!(acc, vec![2.0, 4.0, 6.0]);
    }

    #[test]
    fn matvec_identity() {
        let m = SquareMatrix::<f64>::identity(3);
        assert_eq!(m.matvec(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let m = SquareMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let (mut vals, _) = m.symmetric_eigen();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let m = SquareMatrix::from_rows(&[
            vec![4.0, 1.0, -2.0, 0.3],
            vec![1.0, 3.0, 0.5, -0.7],
            vec![-2.0, 0.5, 5.0, 0.1],
            vec![0.3, -0.7, 0.1, 1.5],
        ])
        .unwrap();
        let (vals, v) = m.symmetric_eigen();

        // V diag(vals) Vᵀ == m
        let mut lam = SquareMatrix::zeros(4);
        for i in 0..4 {
            lam[(i, i)] = vals[i];
        }
        let recon = v.matmul(&lam).matmul(&v.transpose());
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (recon[(i, j)] - m[(i, j)]).abs() < 1e-12,
                    "reconstruction off at ({i},{j}): {} vs {}",
                    recon[(i, j)],
                    m[(i, j)]
                );
            }
        }

        // Vᵀ V == I
        let gram = v.transpose().matmul(&v);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gl16_is_exact_for_high_degree_polynomials() {
        // Degree 30 monomial: ∫_{-1}^{1} x^30 dx = 2/31.
        let got = gauss_legendre_16(-1.0, 1.0, |x: f64| x.powi(30));
        assert!((got - 2.0 / 31.0).abs() < 1e-15, "got {got}");
        // Total weight: ∫ 1 = 2.
        let total = gauss_legendre_16(-1.0, 1.0, |_| 1.0);
        assert!((total - 2.0).abs() < 1e-15);
    }

    #[test]
    fn gl16_handles_shifted_intervals_and_oscillation() {
        // ∫_1^2 cos x dx = sin 2 − sin 1.
        let got = gauss_legendre_16(1.0, 2.0, |x: f64| x.cos());
        assert!((got - (2.0f64.sin() - 1.0f64.sin())).abs() < 1e-14);
    }

    #[test]
    fn gl16_complex_matches_exact_exponential() {
        // ∫_0^1 e^{i c r} dr = (e^{i c} − 1)/(i c)
        let c = 3.7f64;
        let got = gauss_legendre_16_complex(0.0, 1.0, |r| {
            num_complex::Complex::new(0.0, c * r).exp()
        });
        let i = num_complex::Complex::new(0.0, 1.0);
        let want = ((i * c).exp() - 1.0) / (i * c);
        assert!((got - want).norm() < 1e-14);
    }
}
