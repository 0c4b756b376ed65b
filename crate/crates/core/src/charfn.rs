//! Characteristic exponents and characteristic-function comparisons.
//!
//! A process is specified by its characteristics `(γ, Q, ν, K)`: drift,
//! Gaussian covariance, Lévy measure and the truncation disk. Its exponent is
//!
//! ```text
//! η(a) = i⟨γ,a⟩ − ½⟨Qa,a⟩ + ∫ (e^{i⟨x,a⟩} − 1 − i⟨x,a⟩·1_K(x)) dν(x)
//! ```
//!
//! and the law at time `t` has characteristic function `exp(t·η(a))`. For
//! atomic measures the integral is a finite sum and exact; for radial-shell
//! measures it is summed shell by shell (exact direction average × 16-point
//! Gauss–Legendre in the radius) until the second-moment tail bound drops
//! below [`LK_QUADRATURE_TOL`].

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, SquareMatrix};
use crate::measure::LevyMeasureSpec;
use crate::scalar::Scalar;
use crate::space::BanachDisk;

/// Absolute tolerance on |q_ij − q_ji| for accepting a covariance matrix.
pub const Q_SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalues of Q may undershoot zero by at most this much (rounding slack
/// of an intended PSD matrix); anything lower is rejected.
pub const Q_EIGENVALUE_FLOOR: f64 = -1e-10;

/// Target for the neglected-shell bound when the exponent integral is
/// evaluated by quadrature.
pub const LK_QUADRATURE_TOL: f64 = 1e-10;

/// Shell cap for the quadrature loop.
const LK_SHELL_CAP: u32 = 200_000;

/// Characteristics `(γ, Q, ν, K)` of a Lévy process.
#[derive(Debug, Clone)]
pub struct Characteristics<T> {
    gamma: Vec<T>,
    q: SquareMatrix<T>,
    nu: LevyMeasureSpec<T>,
    disk: BanachDisk<T>,
}

impl<T: Scalar> Characteristics<T> {
    /// Validates dimensional consistency, symmetry of `Q` (within
    /// [`Q_SYMMETRY_TOL`], scaled by the largest entry) and positive
    /// semidefiniteness (eigenvalues above [`Q_EIGENVALUE_FLOOR`]).
    pub fn new(
        gamma: Vec<T>,
        q: SquareMatrix<T>,
        nu: LevyMeasureSpec<T>,
        disk: BanachDisk<T>,
    ) -> Result<Self> {
        let dim = gamma.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be ≥ 1".into()));
        }
        if q.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: q.dim() });
        }
        if nu.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: nu.dim() });
        }
        if disk.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: disk.dim() });
        }
        let scale = q.max_abs().max(T::one()).to_f64_lossy();
        let asym = q.max_asymmetry().to_f64_lossy();
        if asym > Q_SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric { asymmetry: asym, tolerance: Q_SYMMETRY_TOL * scale });
        }
        let (eigs, _) = q.symmetric_eigen();
        for lambda in &eigs {
            if lambda.to_f64_lossy() < Q_EIGENVALUE_FLOOR {
                return Err(Error::NotPositiveSemidefinite {
                    eigenvalue: lambda.to_f64_lossy(),
                    floor: Q_EIGENVALUE_FLOOR,
                });
            }
        }
        Ok(Characteristics { gamma, q, nu, disk })
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[T] {
        &self.gamma
    }

    pub fn q(&self) -> &SquareMatrix<T> {
        &self.q
    }

    pub fn nu(&self) -> &LevyMeasureSpec<T> {
        &self.nu
    }

    pub fn disk(&self) -> &BanachDisk<T> {
        &self.disk
    }

    /// The characteristic exponent `η(a)`.
    pub fn levy_exponent(&self, a: &[T]) -> Result<Complex<T>> {
        if a.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: a.len() });
        }
        let drift = Complex::new(T::zero(), dot(&self.gamma, a));
        let half = T::from_f64_lossy(0.5);
        let gaussian = Complex::new(-half * self.q.bilinear(a, a), T::zero());
        let jump = self.jump_integral(a)?;
        Ok(drift + gaussian + jump)
    }

    /// `∫ (e^{i⟨x,a⟩} − 1 − i⟨x,a⟩·1_K(x)) dν(x)`.
    fn jump_integral(&self, a: &[T]) -> Result<Complex<T>> {
        match &self.nu {
            LevyMeasureSpec::Atomic(at) => {
                let mut acc = Complex::new(T::zero(), T::zero());
                for atom in at.atoms() {
                    let theta = dot(&atom.point, a);
                    let mut val =
                        Complex::new(T::zero(), theta).exp() - Complex::new(T::one(), T::zero());
                    if self.disk.gauge_norm(&atom.point)? <= T::one() {
                        val = val - Complex::new(T::zero(), theta);
                    }
                    acc = acc + val * atom.mass;
                }
                Ok(acc)
            }
            LevyMeasureSpec::RadialShell(r) => {
                // Residual shell: uncompensated, finite mass, one quadrature.
                let mut acc = crate::measure::radial_tail_cf_integral(r, &self.disk, a)?;
                if r.mass_coeff() > T::zero() {
                    // Compensated shells: |e^{iθ} − 1 − iθ| ≤ θ²/2 and
                    // |⟨x,a⟩| ≤ ‖x‖_K·dual(a), so the not-yet-summed shells
                    // contribute at most dual(a)²/2 × the second-moment tail,
                    // which is peeled down incrementally as shells are added.
                    let units: Vec<Vec<T>> = r
                        .directions()
                        .iter()
                        .map(|u| {
                            let g = self.disk.gauge_norm(u)?;
                            Ok(crate::linalg::scale(u, T::one() / g))
                        })
                        .collect::<Result<_>>()?;
                    let dir_weight = T::one() / T::from_usize(units.len()).unwrap();
                    let dual = self.disk.dual_bound(a)?.to_f64_lossy();
                    let half_dual_sq = 0.5 * dual * dual;
                    let mut m2_tail = self.nu.tail_second_moment(&self.disk, 0)?.to_f64_lossy();
                    let c = r.mass_coeff().to_f64_lossy();
                    let decay = r.decay().to_f64_lossy();
                    let mut n: u32 = 1;
                    loop {
                        let bound = (half_dual_sq * m2_tail).max(0.0);
                        if bound < LK_QUADRATURE_TOL {
                            break;
                        }
                        if n > LK_SHELL_CAP {
                            return Err(Error::QuadratureTolerance {
                                bound,
                                tolerance: LK_QUADRATURE_TOL,
                                cap: LK_SHELL_CAP,
                            });
                        }
                        acc = acc
                            + crate::measure::shell_cf_integral(r, &units, dir_weight, n, a, true);
                        let nf = n as f64;
                        let lo = 1.0 / (nf + 1.0);
                        let hi = 1.0 / nf;
                        m2_tail -= c * nf.powf(-decay) * (lo * lo + lo * hi + hi * hi) / 3.0;
                        n += 1;
                    }
                }
                Ok(acc)
            }
        }
    }

    /// Characteristic function of the marginal at time `t ≥ 0`:
    /// `exp(t·η(a))`.
    pub fn cf_at_time(&self, a: &[T], t: T) -> Result<Complex<T>> {
        if t < T::zero() {
            return Err(Error::NegativeTime(t.to_f64_lossy()));
        }
        let eta = self.levy_exponent(a)?;
        Ok((eta * t).exp())
    }
}

/// Empirical characteristic function of a sample cloud at one functional:
/// mean of `e^{i⟨x_k, a⟩}` plus a combined standard error
/// `sqrt(se_re² + se_im²)`.
///
/// Summation is a fixed-shape pairwise reduction, so the result is
/// bit-reproducible regardless of how callers distribute the surrounding
/// work.
pub fn empirical_cf<T: Scalar>(samples: &[Vec<T>], a: &[T]) -> Result<(Complex<T>, T)> {
    if samples.len() < 2 {
        return Err(Error::NotEnoughSamples { need: 2, got: samples.len() });
    }
    let phases: Vec<Complex<T>> = samples
        .iter()
        .map(|x| {
            if x.len() != a.len() {
                return Err(Error::DimensionMismatch { expected: a.len(), got: x.len() });
            }
            Ok(Complex::new(T::zero(), dot(x, a)).exp())
        })
        .collect::<Result<_>>()?;
    let m = T::from_usize(phases.len()).unwrap();
    let mean = pairwise_sum(&phases) / m;

    let sq_dev: Vec<Complex<T>> = phases
        .iter()
        .map(|p| {
            let d = *p - mean;
            Complex::new(d.re * d.re, d.im * d.im)
        })
        .collect();
    let sums = pairwise_sum(&sq_dev);
    let denom = m * (m - T::one());
    let se = ((sums.re + sums.im) / denom).sqrt();
    Ok((mean, se))
}

/// Pairwise (binary-tree) summation: deterministic and far more accurate
/// than a running sum on long inputs.
fn pairwise_sum<T: Scalar>(v: &[Complex<T>]) -> Complex<T> {
    match v.len() {
        0 => Complex::new(T::zero(), T::zero()),
        1 => v[0],
        2 => v[0] + v[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
        }
    }
}

/// One row of a characteristic-function comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CFReport<T> {
    pub functional: Vec<T>,
    pub time: T,
    pub analytic_re: T,
    pub analytic_im: T,
    pub empirical_re: T,
    pub empirical_im: T,
    pub stderr: T,
    /// `|empirical − analytic| / stderr`; zero when both error and stderr
    /// vanish, infinite when the sample is degenerate but wrong.
    pub z_score: T,
}

/// Compare the empirical CF of `samples` (marginal at time `t`) against
/// `exp(t·η)` for each functional.
pub fn cf_compare<T: Scalar>(
    chars: &Characteristics<T>,
    samples: &[Vec<T>],
    t: T,
    functionals: &[Vec<T>],
) -> Result<Vec<CFReport<T>>> {
    let mut reports = Vec::with_capacity(functionals.len());
    for a in functionals {
        let analytic = chars.cf_at_time(a, t)?;
        let (empirical, stderr) = empirical_cf(samples, a)?;
        let err = (empirical - analytic).norm();
        let z = if stderr > T::zero() {
            err / stderr
        } else if err == T::zero() {
            T::zero()
        } else {
            T::infinity()
        };
        reports.push(CFReport {
            functional: a.clone(),
            time: t,
            analytic_re: analytic.re,
            analytic_im: analytic.im,
            empirical_re: empirical.re,
            empirical_im: empirical.im,
            stderr,
            z_score: z,
        });
    }
    Ok(reports)
}
