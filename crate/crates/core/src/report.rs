//! The on-disk experiment report.
//!
//! Everything here is a plain serde data carrier in `f64`, deliberately
//! separate from the validated core types: a report is an output artifact
//! (and an input to `report`-style tooling), not a construction path back
//! into the library, so deserializing one can't bypass any invariant.

use serde::{Deserialize, Serialize};

use crate::charfn::CFReport;
use crate::decomp::{GaussianityCheck, IndependenceStat, OrderEstimate, ReducibilityReport};
use crate::gaussian::CovarianceCheck;
use crate::scalar::Scalar;

/// Top-level contents of `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    /// SHA-256 of the canonicalized effective configuration. Consumers use
    /// it to refuse mixing artifacts from different configurations.
    pub config_hash: String,
    pub seed: u64,
    pub replicas: usize,
    pub horizon: f64,
    pub shell_cutoff: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cf_checks: Vec<CFReport<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub independence: Vec<IndependenceEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gaussianity: Vec<GaussianityEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub wiener_covariance: Vec<CovarianceEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shell_counts: Vec<CountEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reducibility: Option<ReducibilityEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceEntry>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndependenceEntry {
    pub first: String,
    pub second: String,
    pub functional: usize,
    pub transform: String,
    pub correlation: f64,
    pub z: f64,
}

impl<T: Scalar> From<&IndependenceStat<T>> for IndependenceEntry {
    fn from(s: &IndependenceStat<T>) -> Self {
        IndependenceEntry {
            first: s.first.label().to_string(),
            second: s.second.label().to_string(),
            functional: s.functional,
            transform: s.transform.label().to_string(),
            correlation: s.correlation.to_f64_lossy(),
            z: s.z.to_f64_lossy(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianityEntry {
    pub functional: Vec<f64>,
    pub time: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub z_skew: f64,
    pub z_kurt: f64,
}

impl GaussianityEntry {
    pub fn from_check<T: Scalar>(
        functional: &[T],
        time: T,
        check: &GaussianityCheck<T>,
    ) -> Self {
        GaussianityEntry {
            functional: functional.iter().map(|v| v.to_f64_lossy()).collect(),
            time: time.to_f64_lossy(),
            skewness: check.skewness.to_f64_lossy(),
            excess_kurtosis: check.excess_kurtosis.to_f64_lossy(),
            z_skew: check.z_skew.to_f64_lossy(),
            z_kurt: check.z_kurt.to_f64_lossy(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceEntry {
    pub a: Vec<f64>,
    pub s: f64,
    pub b: Vec<f64>,
    pub t: f64,
    pub estimate: f64,
    pub target: f64,
    pub stderr: f64,
    pub z: f64,
}

impl CovarianceEntry {
    pub fn from_check<T: Scalar>(
        a: &[T],
        s: T,
        b: &[T],
        t: T,
        check: &CovarianceCheck<T>,
    ) -> Self {
        CovarianceEntry {
            a: a.iter().map(|v| v.to_f64_lossy()).collect(),
            s: s.to_f64_lossy(),
            b: b.iter().map(|v| v.to_f64_lossy()).collect(),
            t: t.to_f64_lossy(),
            estimate: check.estimate.to_f64_lossy(),
            target: check.target.to_f64_lossy(),
            stderr: check.stderr.to_f64_lossy(),
            z: check.z.to_f64_lossy(),
        }
    }
}

/// Poisson sanity of the per-shell jump counts across replicas.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountEntry {
    pub shell: u32,
    pub intensity: f64,
    pub mean: f64,
    pub variance: f64,
    pub z_mean: f64,
    pub z_variance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderEntry {
    pub lower: u32,
    pub upper: u32,
    pub exact: bool,
}

impl From<OrderEstimate> for OrderEntry {
    fn from(o: OrderEstimate) -> Self {
        match o {
            OrderEstimate::Exact(m) => OrderEntry { lower: m, upper: m, exact: true },
            OrderEstimate::Bracket { lower, upper } => OrderEntry { lower, upper, exact: false },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducibilityEntry {
    pub epsilon: f64,
    pub levels: Vec<u32>,
    pub orders: Vec<OrderEntry>,
    pub stabilized: bool,
}

impl<T: Scalar> From<&ReducibilityReport<T>> for ReducibilityEntry {
    fn from(r: &ReducibilityReport<T>) -> Self {
        ReducibilityEntry {
            epsilon: r.epsilon.to_f64_lossy(),
            levels: r.levels.clone(),
            orders: r.orders.iter().map(|&o| o.into()).collect(),
            stabilized: r.stabilized,
        }
    }
}

/// Convergence of the truncated small-jump series: replica-averaged squared
/// sup-gaps between consecutive levels against the martingale bound
/// 4·(tail variance difference).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceEntry {
    pub levels: Vec<u32>,
    pub mean_sq_gaps: Vec<f64>,
    pub tail_variance_bounds: Vec<f64>,
    pub within_bound: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}
