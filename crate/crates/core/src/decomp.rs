//! Splitting a process into drift + Wiener + compensated small jumps +
//! large jumps, and the statistical checks that the pieces behave as
//! claimed: summand independence, Gaussianity of the continuous part, and
//! the finite-order reducibility of the small-jump laws.

use crate::charfn::Characteristics;
use crate::error::{Error, Result};
use crate::gaussian::WienerSampler;
use crate::jumprm::{
    coalesce_marks, sample_prm, sample_prm_with_kind, MarkedAtom, PRMSample,
};
use crate::linalg::{add, dot, pairwise_sum, scale, sub};
use crate::measure::{AtomicMeasure, LevyMeasureSpec};
use crate::paths::{accumulate_jumps, CadlagPath};
use crate::scalar::Scalar;
use crate::space::{BanachDisk, ShellIndex};
use crate::streams::{stream, StreamKind};

/// The random summands of one synthesized replica. The deterministic drift
/// is excluded: correlating against a constant is meaningless.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentId {
    Wiener,
    SmallJumps,
    LargeJumps,
}

impl ComponentId {
    pub const ALL: [ComponentId; 3] =
        [ComponentId::Wiener, ComponentId::SmallJumps, ComponentId::LargeJumps];

    pub fn label(self) -> &'static str {
        match self {
            ComponentId::Wiener => "wiener",
            ComponentId::SmallJumps => "small_jumps",
            ComponentId::LargeJumps => "large_jumps",
        }
    }
}

/// One replica of the full process together with its four summands, all on
/// a single shared knot set (simulation grid ∪ every jump time), so that
/// `x = drift + w + j + l` holds knot by knot in exact arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentBundle<T> {
    pub x: CadlagPath<T>,
    pub drift: CadlagPath<T>,
    pub w: CadlagPath<T>,
    pub j: CadlagPath<T>,
    pub l: CadlagPath<T>,
    pub prm: PRMSample<T>,
    pub truncation: ShellIndex,
}

impl<T: Scalar> ComponentBundle<T> {
    pub fn component(&self, id: ComponentId) -> &CadlagPath<T> {
        match id {
            ComponentId::Wiener => &self.w,
            ComponentId::SmallJumps => &self.j,
            ComponentId::LargeJumps => &self.l,
        }
    }
}

/// Replica factory for one characteristic triplet: the covariance is
/// factored once, the small-jump compensator sum is computed once, and each
/// replica then draws from its own deterministic streams.
#[derive(Debug, Clone)]
pub struct Synthesizer<T> {
    chars: Characteristics<T>,
    wiener: WienerSampler<T>,
    shell_cutoff: ShellIndex,
    comp_small: Vec<T>,
}

impl<T: Scalar> Synthesizer<T> {
    pub fn new(
        chars: Characteristics<T>,
        grid: Vec<T>,
        shell_cutoff: ShellIndex,
    ) -> Result<Self> {
        if shell_cutoff == 0 {
            return Err(Error::InvalidParameter(
                "the shell cutoff must be ≥ 1 so at least one compensated shell exists".into(),
            ));
        }
        let wiener = WienerSampler::new(chars.q().clone(), grid)?;
        let comp_small = small_jump_compensator(chars.nu(), chars.disk(), shell_cutoff)?;
        Ok(Synthesizer { chars, wiener, shell_cutoff, comp_small })
    }

    pub fn characteristics(&self) -> &Characteristics<T> {
        &self.chars
    }

    pub fn grid(&self) -> &[T] {
        self.wiener.grid()
    }

    pub fn horizon(&self) -> T {
        self.wiener.horizon()
    }

    pub fn shell_cutoff(&self) -> ShellIndex {
        self.shell_cutoff
    }

    /// Draw one replica. The result depends only on `(seed, replica)` —
    /// never on evaluation order — because every randomness consumer has
    /// its own addressed stream.
    pub fn synthesize(&self, seed: u64, replica: u32) -> Result<ComponentBundle<T>> {
        let dim = self.chars.dim();
        let horizon = self.horizon();
        let prm = sample_prm(
            self.chars.nu(),
            self.chars.disk(),
            horizon,
            self.shell_cutoff,
            seed,
            replica,
        )?;
        let mut wiener_rng = stream(seed, replica, StreamKind::Wiener, 0);
        let w_grid = self.wiener.sample_path(&mut wiener_rng);

        // shared knots: the simulation grid plus every jump time
        let mut knots: Vec<T> = self.grid().to_vec();
        knots.extend(prm.atoms().iter().map(|a| a.time));
        knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        knots.dedup();

        let small: Vec<&MarkedAtom<T>> =
            prm.atoms().iter().filter(|a| a.shell >= 1).collect();
        let large: Vec<&MarkedAtom<T>> =
            prm.atoms().iter().filter(|a| a.shell == 0).collect();
        let all: Vec<&MarkedAtom<T>> = prm.atoms().iter().collect();
        let j = accumulate_jumps(&knots, dim, &coalesce_marks(&small), &self.comp_small)?;
        let l = accumulate_jumps(&knots, dim, &coalesce_marks(&large), &vec![T::zero(); dim])?;
        let w = w_grid.with_knots(&knots)?;
        let drift_values: Vec<Vec<T>> =
            knots.iter().map(|&t| scale(self.chars.gamma(), t)).collect();
        let drift = CadlagPath::new(knots.clone(), drift_values, Vec::new())?;

        // x = ((drift + w) + j) + l in this fixed order at every knot
        let x_values: Vec<Vec<T>> = (0..knots.len())
            .map(|k| {
                add(
                    &add(&add(&drift.values()[k], &w.values()[k]), &j.values()[k]),
                    &l.values()[k],
                )
            })
            .collect();
        let x = CadlagPath::new(knots, x_values, coalesce_marks(&all))?;
        Ok(ComponentBundle { x, drift, w, j, l, prm, truncation: self.shell_cutoff })
    }
}

/// `Σ_{n=1..=cutoff} ∫_{C_n} x dν` — the drift removed from the truncated
/// small-jump sum.
pub fn small_jump_compensator<T: Scalar>(
    nu: &LevyMeasureSpec<T>,
    disk: &BanachDisk<T>,
    shell_cutoff: ShellIndex,
) -> Result<Vec<T>> {
    let mut comp = vec![T::zero(); nu.dim()];
    for n in 1..=shell_cutoff {
        comp = add(&comp, &nu.shell_compensator(disk, n)?);
    }
    Ok(comp)
}

/// A path split back into its jump-born parts and the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<T> {
    /// Staircase of the jumps outside the disk.
    pub large: CadlagPath<T>,
    /// Compensated sum of the jumps in shells `1..=truncation`.
    pub small_compensated: CadlagPath<T>,
    /// `x − large − small_compensated`: drift + Gaussian part, plus any
    /// jumps deeper than the truncation (they stay in its jump list).
    pub residual: CadlagPath<T>,
    pub truncation: ShellIndex,
}

/// Recover the decomposition of a path from its jump list alone.
///
/// Jumps are classified by the gauge shell of their delta; the same
/// accumulation code as the synthesizer then rebuilds the large and
/// compensated-small parts, so analyzing a synthesized path returns those
/// components bit-for-bit.
pub fn analyze<T: Scalar>(
    x: &CadlagPath<T>,
    nu: &LevyMeasureSpec<T>,
    disk: &BanachDisk<T>,
    truncation: ShellIndex,
) -> Result<Decomposition<T>> {
    if truncation == 0 {
        return Err(Error::InvalidParameter(
            "the truncation level must be ≥ 1 so at least one compensated shell exists".into(),
        ));
    }
    let dim = x.dim();
    if nu.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: nu.dim() });
    }
    let knots = x.times().to_vec();
    let mut large = Vec::new();
    let mut small = Vec::new();
    let mut deep = Vec::new();
    for j in x.jumps() {
        let shell = disk.shell_index(&j.delta)?;
        if shell == 0 {
            large.push(j.clone());
        } else if shell <= truncation {
            small.push(j.clone());
        } else {
            deep.push(j.clone());
        }
    }
    let comp = small_jump_compensator(nu, disk, truncation)?;
    let large = accumulate_jumps(&knots, dim, &large, &vec![T::zero(); dim])?;
    let small = accumulate_jumps(&knots, dim, &small, &comp)?;
    let residual_values: Vec<Vec<T>> = (0..knots.len())
        .map(|k| sub(&sub(&x.values()[k], &large.values()[k]), &small.values()[k]))
        .collect();
    let residual = CadlagPath::new(knots, residual_values, deep)?;
    Ok(Decomposition { large, small_compensated: small, residual, truncation })
}

// ---------------------------------------------------------------------------
// Independence of the summands
// ---------------------------------------------------------------------------

/// Bounded or linear test function applied to a projection before
/// correlating. Bounded transforms see dependence that raw covariance can
/// miss; the linear one sees scale coupling directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Linear,
    Cos,
    Sin,
}

impl Transform {
    pub const ALL: [Transform; 3] = [Transform::Linear, Transform::Cos, Transform::Sin];

    pub fn label(self) -> &'static str {
        match self {
            Transform::Linear => "linear",
            Transform::Cos => "cos",
            Transform::Sin => "sin",
        }
    }

    fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Transform::Linear => v,
            Transform::Cos => v.cos(),
            Transform::Sin => v.sin(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IndependenceStat<T> {
    pub first: ComponentId,
    pub second: ComponentId,
    pub functional: usize,
    pub transform: Transform,
    pub correlation: T,
    /// `r·√M`, approximately standard normal when the components are
    /// independent.
    pub z: T,
}

/// Sample correlation of `f(⟨A_t, a⟩)` and `f(⟨B_t, a⟩)` across replicas,
/// studentized as `z = r·√M`.
pub fn independence_stat<T: Scalar>(
    bundles: &[ComponentBundle<T>],
    first: ComponentId,
    second: ComponentId,
    a: &[T],
    t: T,
    transform: Transform,
) -> Result<(T, T)> {
    if bundles.len() < 8 {
        return Err(Error::NotEnoughSamples { need: 8, got: bundles.len() });
    }
    let mut u = Vec::with_capacity(bundles.len());
    let mut v = Vec::with_capacity(bundles.len());
    for b in bundles {
        u.push(transform.apply(dot(&b.component(first).value_at(t)?, a)));
        v.push(transform.apply(dot(&b.component(second).value_at(t)?, a)));
    }
    let m = T::from_usize(bundles.len()).unwrap();
    let (mu, mv) = (pairwise_sum(&u) / m, pairwise_sum(&v) / m);
    let mut cov = T::zero();
    let (mut var_u, mut var_v) = (T::zero(), T::zero());
    for i in 0..bundles.len() {
        let (du, dv) = (u[i] - mu, v[i] - mv);
        cov = cov + du * dv;
        var_u = var_u + du * du;
        var_v = var_v + dv * dv;
    }
    if var_u == T::zero() || var_v == T::zero() {
        return Err(Error::DegenerateVariance);
    }
    let r = cov / (var_u.sqrt() * var_v.sqrt());
    Ok((r, r * m.sqrt()))
}

/// All cross-component correlations at time `t`: every unordered pair of
/// distinct summands, for every functional, with the transform cycling
/// through linear/cos/sin by functional index.
pub fn independence_check<T: Scalar>(
    bundles: &[ComponentBundle<T>],
    functionals: &[Vec<T>],
    t: T,
) -> Result<Vec<IndependenceStat<T>>> {
    const PAIRS: [(ComponentId, ComponentId); 3] = [
        (ComponentId::Wiener, ComponentId::SmallJumps),
        (ComponentId::Wiener, ComponentId::LargeJumps),
        (ComponentId::SmallJumps, ComponentId::LargeJumps),
    ];
    let mut stats = Vec::with_capacity(functionals.len() * PAIRS.len());
    for (i, a) in functionals.iter().enumerate() {
        let transform = Transform::ALL[i % Transform::ALL.len()];
        for &(first, second) in &PAIRS {
            let (correlation, z) = independence_stat(bundles, first, second, a, t, transform)?;
            stats.push(IndependenceStat { first, second, functional: i, transform, correlation, z });
        }
    }
    Ok(stats)
}

// ---------------------------------------------------------------------------
// Gaussianity of the continuous part
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct GaussianityCheck<T> {
    pub mean: T,
    pub variance: T,
    pub skewness: T,
    pub excess_kurtosis: T,
    /// Skewness over its null standard error √(6/M).
    pub z_skew: T,
    /// Excess kurtosis over its null standard error √(24/M).
    pub z_kurt: T,
}

/// Moment-based normality check of scalar samples. Under a Gaussian null
/// both z-scores are asymptotically standard normal; heavy tails inflate
/// `z_kurt` and asymmetry inflates `z_skew`.
pub fn gaussianity_check<T: Scalar>(samples: &[T]) -> Result<GaussianityCheck<T>> {
    if samples.len() < 8 {
        return Err(Error::NotEnoughSamples { need: 8, got: samples.len() });
    }
    let m = T::from_usize(samples.len()).unwrap();
    let mean = pairwise_sum(samples) / m;
    let (mut m2, mut m3, mut m4) = (T::zero(), T::zero(), T::zero());
    for &s in samples {
        let d = s - mean;
        let d2 = d * d;
        m2 = m2 + d2;
        m3 = m3 + d2 * d;
        m4 = m4 + d2 * d2;
    }
    m2 = m2 / m;
    m3 = m3 / m;
    m4 = m4 / m;
    if m2 == T::zero() {
        return Err(Error::DegenerateVariance);
    }
    let skewness = m3 / (m2 * m2.sqrt());
    let excess_kurtosis = m4 / (m2 * m2) - T::from_f64_lossy(3.0);
    let z_skew = skewness / (T::from_f64_lossy(6.0) / m).sqrt();
    let z_kurt = excess_kurtosis / (T::from_f64_lossy(24.0) / m).sqrt();
    Ok(GaussianityCheck {
        mean,
        variance: m2 * m / (m - T::one()),
        skewness,
        excess_kurtosis,
        z_skew,
        z_kurt,
    })
}

// ---------------------------------------------------------------------------
// Reducibility of the small-jump laws
// ---------------------------------------------------------------------------

/// How far an order search and the Monte Carlo fallback may go.
#[derive(Debug, Clone, Copy)]
pub struct ReducibilityBudget {
    /// Give up (with an error) beyond this dilation order.
    pub max_order: u32,
    /// Replicas for the Monte Carlo route (radial measures).
    pub mc_replicas: usize,
    /// Seed for the Monte Carlo route; drawn from its own stream family so
    /// it never collides with simulation streams under the same seed.
    pub seed: u64,
}

impl Default for ReducibilityBudget {
    fn default() -> Self {
        ReducibilityBudget { max_order: 10_000, mc_replicas: 20_000, seed: 0 }
    }
}

/// An order, either exact (from enumeration) or bracketed by a ±3σ
/// binomial confidence band (from Monte Carlo).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderEstimate {
    Exact(u32),
    Bracket { lower: u32, upper: u32 },
}

impl OrderEstimate {
    pub fn upper(self) -> u32 {
        match self {
            OrderEstimate::Exact(m) => m,
            OrderEstimate::Bracket { upper, .. } => upper,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReducibilityReport<T> {
    pub levels: Vec<ShellIndex>,
    pub epsilon: T,
    /// Smallest dilation order m with the level's shifted jump-sum law
    /// putting ≥ 1−ε of its mass inside m·K, one entry per level.
    pub orders: Vec<OrderEstimate>,
    /// Whether the two deepest levels agreed — the observable form of the
    /// orders settling as the truncation grows.
    pub stabilized: bool,
}

/// For each truncation level ℓ, find the smallest m ≥ 1 such that the law
/// of the compensated shell-1..ℓ jump sum at unit time puts mass ≥ 1−ε in
/// the dilated disk m·K.
///
/// Atomic measures are enumerated exactly (the omitted enumeration tail is
/// kept three orders below ε so it cannot flip the verdict). Radial
/// measures fall back to Monte Carlo with a 3σ binomial bracket.
pub fn reducibility_check<T: Scalar>(
    nu: &LevyMeasureSpec<T>,
    disk: &BanachDisk<T>,
    levels: &[ShellIndex],
    epsilon: T,
    budget: &ReducibilityBudget,
) -> Result<ReducibilityReport<T>> {
    if levels.is_empty() {
        return Err(Error::InvalidParameter("no truncation levels requested".into()));
    }
    for w in levels.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidParameter(
                "truncation levels must increase strictly".into(),
            ));
        }
    }
    if levels[0] == 0 {
        return Err(Error::ResidualShellCompensator);
    }
    if !(epsilon > T::zero() && epsilon < T::one()) {
        return Err(Error::InvalidParameter("epsilon must lie in (0, 1)".into()));
    }
    let mut orders = Vec::with_capacity(levels.len());
    for &level in levels {
        let order = match nu {
            LevyMeasureSpec::Atomic(atomic) => {
                OrderEstimate::Exact(atomic_order(atomic, nu, disk, level, epsilon, budget)?)
            }
            LevyMeasureSpec::RadialShell(_) => mc_order(nu, disk, level, epsilon, budget)?,
        };
        orders.push(order);
    }
    let stabilized = match orders.len() {
        0 | 1 => false,
        n => orders[n - 1] == orders[n - 2],
    };
    Ok(ReducibilityReport { levels: levels.to_vec(), epsilon, orders, stabilized })
}

fn atomic_order<T: Scalar>(
    atomic: &AtomicMeasure<T>,
    nu: &LevyMeasureSpec<T>,
    disk: &BanachDisk<T>,
    level: ShellIndex,
    epsilon: T,
    budget: &ReducibilityBudget,
) -> Result<u32> {
    let dim = nu.dim();
    let mut restricted = Vec::new();
    for atom in atomic.atoms() {
        let shell = disk.shell_index(&atom.point)?;
        if shell >= 1 && shell <= level {
            restricted.push(atom.clone());
        }
    }
    if restricted.is_empty() {
        // the empty sum: a point mass at the origin, covered by m = 1
        return Ok(1);
    }
    let restricted = LevyMeasureSpec::Atomic(AtomicMeasure::new(dim, restricted)?);
    let shift = scale(&small_jump_compensator(&restricted, disk, level)?, -T::one());
    // keep the enumeration remainder three orders below ε so it cannot
    // change which side of 1−ε a mass lands on
    let tail_tol = (epsilon.to_f64_lossy() * 1e-3).min(1e-6);
    let law = restricted
        .poisson_exponential_finite(512, tail_tol)?
        .translated(&shift)?;
    let want = T::one() - epsilon;
    for m in 1..=budget.max_order {
        if law.mass_within(disk, T::from_u32(m).unwrap())? >= want {
            return Ok(m);
        }
    }
    Err(Error::BudgetExceeded(format!(
        "no dilation order ≤ {} reaches mass 1−ε at level {level}",
        budget.max_order
    )))
}

fn mc_order<T: Scalar>(
    nu: &LevyMeasureSpec<T>,
    disk: &BanachDisk<T>,
    level: ShellIndex,
    epsilon: T,
    budget: &ReducibilityBudget,
) -> Result<OrderEstimate> {
    let comp = small_jump_compensator(nu, disk, level)?;
    let m_total = budget.mc_replicas;
    if m_total < 100 {
        return Err(Error::NotEnoughSamples { need: 100, got: m_total });
    }
    let mut gauges = Vec::with_capacity(m_total);
    for r in 0..m_total {
        let prm = sample_prm_with_kind(
            nu,
            disk,
            T::one(),
            level,
            budget.seed,
            r as u32,
            StreamKind::Reducibility,
        )?;
        let mut sum = scale(&comp, -T::one());
        for a in prm.atoms().iter().filter(|a| a.shell >= 1) {
            sum = add(&sum, &a.mark);
        }
        gauges.push(disk.gauge_norm(&sum)?);
    }
    gauges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mf = m_total as f64;
    let want = (T::one() - epsilon).to_f64_lossy();
    let (mut lower, mut upper) = (None, None);
    for m in 1..=budget.max_order {
        let radius = T::from_u32(m).unwrap();
        // fraction of gauges ≤ m by binary search in the sorted list
        let count = gauges.partition_point(|&g| g <= radius);
        let p = count as f64 / mf;
        let se = (p * (1.0 - p) / mf).sqrt();
        if lower.is_none() && p + 3.0 * se >= want {
            lower = Some(m);
        }
        if p - 3.0 * se >= want {
            upper = Some(m);
            break;
        }
    }
    match (lower, upper) {
        (Some(lower), Some(upper)) => Ok(OrderEstimate::Bracket { lower, upper }),
        _ => Err(Error::BudgetExceeded(format!(
            "no dilation order ≤ {} reaches mass 1−ε at level {level}",
            budget.max_order
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SquareMatrix;
    use crate::measure::{Atom, RadialShellMeasure};
    use crate::paths::{read_paths_csv, write_paths_csv};

    /// Full characteristic triplet: nonzero drift, rank-2 covariance,
    /// radial jump measure with mass inside and outside the disk.
    fn test_chars() -> Characteristics<f64> {
        let gamma = vec![0.4, -0.2];
        let q = SquareMatrix::from_rows(&[vec![0.5, 0.3], vec![0.3, 0.2]]).unwrap();
        let nu = LevyMeasureSpec::RadialShell(
            RadialShellMeasure::new(
                0.9,
                1.0,
                vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
                0.6,
                2.5,
            )
            .unwrap(),
        );
        let disk = BanachDisk::new(vec![1.0, 1.0]).unwrap();
        Characteristics::new(gamma, q, nu, disk).unwrap()
    }

    fn grid(n: usize, horizon: f64) -> Vec<f64> {
        (0..=n).map(|k| horizon * k as f64 / n as f64).collect()
    }

    #[test]
    fn bundle_sum_identity_is_exact_at_every_knot() {
        let syn = Synthesizer::new(test_chars(), grid(8, 1.0), 6).unwrap();
        let b = syn.synthesize(101, 0).unwrap();
        assert!(!b.prm.atoms().is_empty());
        for k in 0..b.x.times().len() {
            let total = add(
                &add(&add(&b.drift.values()[k], &b.w.values()[k]), &b.j.values()[k]),
                &b.l.values()[k],
            );
            assert_eq!(b.x.values()[k], total, "sum identity broken at knot {k}");
        }
        // all components share the knot set
        for c in [&b.drift, &b.w, &b.j, &b.l] {
            assert_eq!(c.times(), b.x.times());
        }
    }

    #[test]
    fn analysis_recovers_the_synthesized_components_bit_for_bit() {
        let chars = test_chars();
        let syn = Synthesizer::new(chars.clone(), grid(8, 1.0), 6).unwrap();
        for replica in 0..20 {
            let b = syn.synthesize(202, replica).unwrap();
            let dec = analyze(&b.x, chars.nu(), chars.disk(), 6).unwrap();
            assert_eq!(dec.large, b.l, "large-jump part differs (replica {replica})");
            assert_eq!(dec.small_compensated, b.j, "small-jump part differs");
            // the residual is drift + wiener up to subtraction roundoff,
            // with no jumps left
            assert!(dec.residual.jumps().is_empty());
            for (k, t) in b.x.times().iter().enumerate() {
                let expect = add(&b.drift.values()[k], &b.w.values()[k]);
                let got = &dec.residual.values()[k];
                for i in 0..2 {
                    assert!(
                        (got[i] - expect[i]).abs() < 1e-12,
                        "residual off at t = {t}: {got:?} vs {expect:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn analysis_survives_a_csv_round_trip() {
        let chars = test_chars();
        let syn = Synthesizer::new(chars.clone(), grid(6, 1.0), 5).unwrap();
        let bundles: Vec<ComponentBundle<f64>> =
            (0..5).map(|r| syn.synthesize(303, r).unwrap()).collect();
        let xs: Vec<CadlagPath<f64>> = bundles.iter().map(|b| b.x.clone()).collect();
        let mut buf = Vec::new();
        write_paths_csv(&mut buf, &xs).unwrap();
        let parsed: Vec<CadlagPath<f64>> = read_paths_csv(buf.as_slice()).unwrap();
        for (b, x) in bundles.iter().zip(&parsed) {
            assert_eq!(&b.x, x);
            let dec = analyze(x, chars.nu(), chars.disk(), 5).unwrap();
            assert_eq!(dec.large, b.l);
            assert_eq!(dec.small_compensated, b.j);
        }
    }

    #[test]
    fn jumps_deeper_than_the_truncation_stay_in_the_residual() {
        let chars = test_chars();
        let syn = Synthesizer::new(chars.clone(), grid(8, 1.0), 8).unwrap();
        // deep shells are sparse (λ ≈ 0.57 here): scan replicas for one that
        // actually drew some — still fully deterministic
        let b = (0..50)
            .map(|r| syn.synthesize(404, r).unwrap())
            .find(|b| b.prm.atoms().iter().any(|a| a.shell > 4))
            .expect("50 replicas without a deep atom is implausible");
        // analyze with a *shallower* truncation than the synthesis cutoff:
        // shells 5..=8 jumps must surface in the residual's jump list
        let dec = analyze(&b.x, chars.nu(), chars.disk(), 4).unwrap();
        let deep_count = b.prm.atoms().iter().filter(|a| a.shell > 4).count();
        assert_eq!(dec.residual.jumps().len(), deep_count);
        for j in dec.residual.jumps() {
            assert!(chars.disk().shell_index(&j.delta).unwrap() > 4);
        }
    }

    #[test]
    fn summands_pass_the_independence_screen() {
        let chars = test_chars();
        let syn = Synthesizer::new(chars, grid(4, 1.0), 4).unwrap();
        let bundles: Vec<ComponentBundle<f64>> =
            (0..1500).map(|r| syn.synthesize(505, r).unwrap()).collect();
        let functionals = vec![
            vec![1.0, 0.0],
            vec![0.3, -0.8],
            vec![-0.5, 0.5],
        ];
        let stats = independence_check(&bundles, &functionals, 1.0).unwrap();
        assert_eq!(stats.len(), 9);
        let failures = stats.iter().filter(|s| s.z.abs() > 4.0).count();
        assert!(
            failures == 0,
            "independent summands flagged: {:?}",
            stats
                .iter()
                .filter(|s| s.z.abs() > 4.0)
                .map(|s| (s.first.label(), s.second.label(), s.transform.label(), s.z))
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn the_negative_control_correlates_a_component_with_itself() {
        let chars = test_chars();
        let syn = Synthesizer::new(chars, grid(4, 1.0), 4).unwrap();
        let bundles: Vec<ComponentBundle<f64>> =
            (0..400).map(|r| syn.synthesize(606, r).unwrap()).collect();
        let a = [0.7, 0.3];
        let (r, z) = independence_stat(
            &bundles,
            ComponentId::SmallJumps,
            ComponentId::SmallJumps,
            &a,
            1.0,
            Transform::Linear,
        )
        .unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert!(z > 10.0, "self-correlation must be flagged, z = {z}");
    }

    #[test]
    fn gaussian_samples_pass_and_exponential_samples_fail_the_normality_check() {
        use rand::Rng;
        let mut rng = stream(808, 0, StreamKind::Functionals, 0);
        let normals: Vec<f64> =
            (0..4000).map(|_| f64::standard_normal(&mut rng)).collect();
        let ok = gaussianity_check(&normals).unwrap();
        assert!(ok.z_skew.abs() < 4.0, "z_skew = {}", ok.z_skew);
        assert!(ok.z_kurt.abs() < 4.0, "z_kurt = {}", ok.z_kurt);

        // exponential variates: skewness 2, excess kurtosis 6
        let exps: Vec<f64> = (0..4000)
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        let bad = gaussianity_check(&exps).unwrap();
        assert!(bad.z_skew > 10.0, "exponential skew missed, z = {}", bad.z_skew);
        assert!(bad.z_kurt > 10.0, "exponential tails missed, z = {}", bad.z_kurt);
    }

    #[test]
    fn wiener_projection_is_gaussian() {
        let chars = test_chars();
        let syn = Synthesizer::new(chars, grid(4, 1.0), 3).unwrap();
        let a = [0.8, -0.6];
        let samples: Vec<f64> = (0..3000)
            .map(|r| {
                let b = syn.synthesize(909, r).unwrap();
                dot(&b.w.value_at(1.0).unwrap(), &a)
            })
            .collect();
        let check = gaussianity_check(&samples).unwrap();
        assert!(check.z_skew.abs() < 4.0, "z_skew = {}", check.z_skew);
        assert!(check.z_kurt.abs() < 4.0, "z_kurt = {}", check.z_kurt);
    }

    /// Poisson tail oracle: the single-atom order can be computed by hand.
    /// One atom of mass 2 at gauge 0.6: the shifted sum is 0.6·(N − 2) with
    /// N ~ Poisson(2), so ‖·‖ ≤ m ⟺ N ≤ 2 + m/0.6, and the 99% quantile
    /// needs m = 3 (P(N ≤ 5) ≈ 0.9834 < 0.99 ≤ P(N ≤ 7) ≈ 0.99890).
    #[test]
    fn single_atom_order_matches_the_poisson_tail() {
        let nu = LevyMeasureSpec::Atomic(
            AtomicMeasure::new(2, vec![Atom { point: vec![0.6, 0.0], mass: 2.0 }]).unwrap(),
        );
        let disk = BanachDisk::unit(2).unwrap();
        let report =
            reducibility_check(&nu, &disk, &[1, 2], 0.01, &ReducibilityBudget::default())
                .unwrap();
        assert_eq!(report.orders, vec![OrderEstimate::Exact(3), OrderEstimate::Exact(3)]);
        assert!(report.stabilized);
    }

    #[test]
    fn two_atom_order_matches_a_direct_convolution() {
        // atoms on opposite axes, different masses
        let x1 = vec![0.7, 0.0];
        let x2 = vec![0.0, -0.45];
        let (l1, l2) = (1.3, 0.8);
        let nu = LevyMeasureSpec::Atomic(
            AtomicMeasure::new(
                2,
                vec![
                    Atom { point: x1.clone(), mass: l1 },
                    Atom { point: x2.clone(), mass: l2 },
                ],
            )
            .unwrap(),
        );
        let disk = BanachDisk::unit(2).unwrap();
        let epsilon = 0.02;
        let report =
            reducibility_check(&nu, &disk, &[2], epsilon, &ReducibilityBudget::default())
                .unwrap();

        // oracle: enumerate the two independent Poisson counts directly
        let shift = [-(l1 * x1[0]), -(l2 * x2[1])];
        let pmf = |lambda: f64, k: u32| -> f64 {
            let mut p = (-lambda).exp();
            for i in 1..=k {
                p *= lambda / i as f64;
            }
            p
        };
        let mass_in = |m: f64| -> f64 {
            let mut acc = 0.0;
            for k1 in 0..60u32 {
                for k2 in 0..60u32 {
                    let p = pmf(l1, k1) * pmf(l2, k2);
                    let g0 = (k1 as f64 * x1[0] + shift[0]).abs();
                    let g1 = (k2 as f64 * x2[1] + shift[1]).abs();
                    if g0.max(g1) <= m {
                        acc += p;
                    }
                }
            }
            acc
        };
        let mut oracle = None;
        for m in 1..100u32 {
            if mass_in(m as f64) >= 1.0 - epsilon {
                oracle = Some(m);
                break;
            }
        }
        assert_eq!(report.orders[0], OrderEstimate::Exact(oracle.unwrap()));
    }

    #[test]
    fn orders_shrink_as_epsilon_loosens() {
        let nu = LevyMeasureSpec::Atomic(
            AtomicMeasure::new(
                2,
                vec![
                    Atom { point: vec![0.6, 0.0], mass: 2.0 },
                    Atom { point: vec![0.0, 0.35], mass: 1.0 },
                ],
            )
            .unwrap(),
        );
        let disk = BanachDisk::unit(2).unwrap();
        let budget = ReducibilityBudget::default();
        let mut previous = u32::MAX;
        for eps in [1e-4, 1e-3, 1e-2, 0.1, 0.5] {
            let report = reducibility_check(&nu, &disk, &[3], eps, &budget).unwrap();
            let m = report.orders[0].upper();
            assert!(m <= previous, "order grew from {previous} to {m} as ε rose to {eps}");
            previous = m;
        }
    }

    #[test]
    fn radial_bracket_is_ordered_and_stabilizes() {
        let nu = LevyMeasureSpec::RadialShell(
            RadialShellMeasure::new(
                0.7,
                1.2,
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                0.0,
                1.5,
            )
            .unwrap(),
        );
        let disk = BanachDisk::unit(2).unwrap();
        let budget = ReducibilityBudget { max_order: 100, mc_replicas: 4000, seed: 5 };
        let report = reducibility_check(&nu, &disk, &[2, 4, 8], 0.05, &budget).unwrap();
        for o in &report.orders {
            match o {
                OrderEstimate::Bracket { lower, upper } => assert!(lower <= upper),
                OrderEstimate::Exact(_) => panic!("radial route must bracket"),
            }
        }
        // deep truncations contribute vanishing variance: orders settle
        assert!(report.stabilized, "orders: {:?}", report.orders);
    }

    #[test]
    fn bad_arguments_are_rejected() {
        let nu = LevyMeasureSpec::Atomic(
            AtomicMeasure::new(1, vec![Atom { point: vec![0.5], mass: 1.0 }]).unwrap(),
        );
        let disk = BanachDisk::unit(1).unwrap();
        let budget = ReducibilityBudget::default();
        assert!(reducibility_check(&nu, &disk, &[], 0.1, &budget).is_err());
        assert!(reducibility_check(&nu, &disk, &[0, 2], 0.1, &budget).is_err());
        assert!(reducibility_check(&nu, &disk, &[2, 2], 0.1, &budget).is_err());
        assert!(reducibility_check(&nu, &disk, &[2], 0.0, &budget).is_err());
        assert!(reducibility_check(&nu, &disk, &[2], 1.0, &budget).is_err());
        let chars = test_chars();
        assert!(Synthesizer::new(chars.clone(), grid(4, 1.0), 0).is_err());
        let p = CadlagPath::<f64>::new(
            vec![0.0, 1.0],
            vec![vec![0.0, 0.0], vec![1.0, 1.0]],
            vec![],
        )
        .unwrap();
        assert!(analyze(&p, chars.nu(), chars.disk(), 0).is_err());
    }
}
