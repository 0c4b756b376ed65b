//! Q-Wiener process sampling on a fixed time grid.
//!
//! The covariance operator Q is factored once as L·Lᵀ through its
//! eigendecomposition; increments are then `√Δt · L·z` with iid standard
//! normal z. Rank-deficient Q is fine — zero eigenvalues simply confine the
//! process to the corresponding subspace.

use rand::Rng;

use crate::charfn::{Q_EIGENVALUE_FLOOR, Q_SYMMETRY_TOL};
use crate::error::{Error, Result};
use crate::linalg::{dot, pairwise_sum, SquareMatrix};
use crate::paths::CadlagPath;
use crate::scalar::Scalar;

/// Largest allowed elementwise deviation of L·Lᵀ from Q, relative to
/// max(1, ‖Q‖_max). Exceeding it means the eigensolver failed and sampled
/// covariances would silently be wrong, so construction refuses.
pub const FACTOR_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct WienerSampler<T> {
    q: SquareMatrix<T>,
    factor: SquareMatrix<T>,
    grid: Vec<T>,
}

impl<T: Scalar> WienerSampler<T> {
    /// Validate Q (symmetric positive semidefinite) and the grid
    /// (`0 = t_0 < t_1 < …`, at least two knots), then factor Q.
    ///
    /// Eigenvalues in `[Q_EIGENVALUE_FLOOR, 0)` are treated as roundoff and
    /// clamped to zero; anything below the floor is rejected.
    pub fn new(q: SquareMatrix<T>, grid: Vec<T>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::InvalidParameter(
                "a Wiener grid needs at least the knots 0 and the horizon".into(),
            ));
        }
        if grid[0] != T::zero() {
            return Err(Error::InvalidParameter("the Wiener grid must start at 0".into()));
        }
        for w in grid.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidParameter(
                    "Wiener grid times must increase strictly".into(),
                ));
            }
        }
        let scale = T::one().max(q.max_abs());
        let sym_tol = T::from_f64_lossy(Q_SYMMETRY_TOL) * scale;
        let asym = q.max_asymmetry();
        if asym > sym_tol {
            return Err(Error::NotSymmetric {
                asymmetry: asym.to_f64_lossy(),
                tolerance: sym_tol.to_f64_lossy(),
            });
        }
        let (eigenvalues, vectors) = q.symmetric_eigen();
        let floor = T::from_f64_lossy(Q_EIGENVALUE_FLOOR) * scale;
        let mut clamped = Vec::with_capacity(eigenvalues.len());
        for &lambda in &eigenvalues {
            if lambda < floor {
                return Err(Error::NotPositiveSemidefinite {
                    eigenvalue: lambda.to_f64_lossy(),
                    floor: floor.to_f64_lossy(),
                });
            }
            clamped.push(lambda.max(T::zero()));
        }
        // L = V·diag(√λ)·Vᵀ, the symmetric square root
        let dim = q.dim();
        let mut scaled = vectors.clone();
        for j in 0..dim {
            let s = clamped[j].sqrt();
            for i in 0..dim {
                scaled[(i, j)] = scaled[(i, j)] * s;
            }
        }
        let factor = scaled.matmul(&vectors.transpose());
        let recon_err = factor
            .matmul(&factor.transpose())
            .sub(&q)
            .max_abs();
        let tol = T::from_f64_lossy(FACTOR_TOL)
            .max(T::epsilon() * T::from_f64_lossy(32.0))
            * scale;
        if recon_err > tol {
            return Err(Error::InvalidParameter(format!(
                "covariance factorization residual {} exceeds {}",
                recon_err, tol
            )));
        }
        Ok(WienerSampler { q, factor, grid })
    }

    pub fn q(&self) -> &SquareMatrix<T> {
        &self.q
    }

    /// The symmetric square root L with L·Lᵀ = Q.
    pub fn factor(&self) -> &SquareMatrix<T> {
        &self.factor
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    pub fn horizon(&self) -> T {
        *self.grid.last().unwrap()
    }

    /// Draw one path: W_0 = 0 and independent Gaussian increments
    /// `W_{t_{k+1}} − W_{t_k} = √(t_{k+1} − t_k) · L·z_k`.
    pub fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R) -> CadlagPath<T> {
        let dim = self.dim();
        let mut values = Vec::with_capacity(self.grid.len());
        let mut current = vec![T::zero(); dim];
        values.push(current.clone());
        let mut z = vec![T::zero(); dim];
        for w in self.grid.windows(2) {
            let sqrt_dt = (w[1] - w[0]).sqrt();
            for zi in z.iter_mut() {
                *zi = T::standard_normal(rng);
            }
            let lz = self.factor.matvec(&z);
            for (c, inc) in current.iter_mut().zip(&lz) {
                *c = *c + sqrt_dt * *inc;
            }
            values.push(current.clone());
        }
        CadlagPath::new(self.grid.clone(), values, Vec::new())
            .expect("grid was validated at construction")
    }

    /// Compare the sampled covariance E⟨W_s,a⟩⟨W_t,b⟩ against the analytic
    /// value ⟨Qa,b⟩·min(s,t). Both times must be grid knots.
    pub fn covariance_check(
        &self,
        paths: &[CadlagPath<T>],
        a: &[T],
        s: T,
        b: &[T],
        t: T,
    ) -> Result<CovarianceCheck<T>> {
        for time in [s, t] {
            if self
                .grid
                .binary_search_by(|g| g.partial_cmp(&time).unwrap())
                .is_err()
            {
                return Err(Error::InvalidParameter(format!(
                    "time {} is not a grid knot; covariance targets are only exact on the grid",
                    time
                )));
            }
        }
        let target = dot(&self.q.matvec(a), b) * s.min(t);
        moment_check(paths, a, s, b, t, target)
    }
}

/// Outcome of a second-moment comparison: the Monte Carlo estimate, the
/// analytic target, the standard error of the estimate, and the studentized
/// deviation z = (estimate − target)/stderr.
#[derive(Debug, Clone, Copy)]
pub struct CovarianceCheck<T> {
    pub estimate: T,
    pub target: T,
    pub stderr: T,
    pub z: T,
}

/// Mean of the products ⟨X_s,a⟩⟨X_t,b⟩ over paths, studentized against
/// `target`. Shared by the Wiener covariance check and the decomposition
/// cross-moment checks.
pub fn moment_check<T: Scalar>(
    paths: &[CadlagPath<T>],
    a: &[T],
    s: T,
    b: &[T],
    t: T,
    target: T,
) -> Result<CovarianceCheck<T>> {
    if paths.len() < 2 {
        return Err(Error::NotEnoughSamples { need: 2, got: paths.len() });
    }
    let mut products = Vec::with_capacity(paths.len());
    for p in paths {
        let xs = p.value_at(s)?;
        let xt = p.value_at(t)?;
        products.push(dot(&xs, a) * dot(&xt, b));
    }
    let m = T::from_usize(products.len()).unwrap();
    let mean = pairwise_sum(&products) / m;
    let sq: Vec<T> = products.iter().map(|&p| (p - mean) * (p - mean)).collect();
    let var = pairwise_sum(&sq) / (m - T::one());
    let stderr = (var / m).sqrt();
    if stderr == T::zero() {
        if mean == target {
            return Ok(CovarianceCheck { estimate: mean, target, stderr, z: T::zero() });
        }
        return Err(Error::DegenerateVariance);
    }
    let z = (mean - target) / stderr;
    Ok(CovarianceCheck { estimate: mean, target, stderr, z })
}
