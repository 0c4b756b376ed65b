//! Poisson random measure sampling and the jump parts built from it.
//!
//! A sample is drawn shell by shell from its own deterministic substream, so
//! raising the shell cutoff refines a sample without disturbing the shells
//! already drawn, and replicas can be generated in any order or in parallel
//! with identical results.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::linalg::add;
use crate::measure::LevyMeasureSpec;
use crate::paths::{accumulate_jumps, sup_gauge_distance, CadlagPath, JumpRecord};
use crate::scalar::Scalar;
use crate::space::{BanachDisk, ShellIndex};
use crate::streams::{stream, StreamKind};

/// One point of the random measure: a jump of size `mark` at `time`,
/// remembered together with the shell it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedAtom<T> {
    pub time: T,
    pub shell: ShellIndex,
    pub mark: Vec<T>,
}

/// A realization of the jump measure on `(0, horizon] × (shells 0..=cutoff)`.
///
/// Shell 0 holds the jumps outside the disk (finitely many, uncompensated);
/// shells 1..=cutoff hold the small jumps down to gauge 1/(cutoff+1). Atoms
/// are sorted by time, then shell.
#[derive(Debug, Clone, PartialEq)]
pub struct PRMSample<T> {
    horizon: T,
    shell_cutoff: ShellIndex,
    atoms: Vec<MarkedAtom<T>>,
}

/// Draw one PRM replica.
///
/// For each shell the substream is keyed by `(seed, replica, shell)`; within
/// it the draw order is: the Poisson count, then per atom a time uniform in
/// `(0, horizon]` followed by the mark. Changing the cutoff therefore never
/// reshuffles lower shells.
pub fn sample_prm<T: Scalar>(
    nu: &LevyMeasureSpec<T>,
    disk: &BanachDisk<T>,
    horizon: T,
    shell_cutoff: ShellIndex,
    seed: u64,
    replica: u32,
) -> Result<PRMSample<T>> {
    sample_prm_with_kind(nu, disk, horizon, shell_cutoff, seed, replica, StreamKind::Jumps)
}

/// [`sample_prm`] on a caller-chosen stream family, for consumers (like the
/// reducibility Monte Carlo) that must not collide with the simulation's own
/// jump streams under the same seed.
pub fn sample_prm_with_kind<T: Scalar>(
    nu: &LevyMeasureSpec<T>,
    disk: &BanachDisk<T>,
    horizon: T,
    shell_cutoff: ShellIndex,
    seed: u64,
    replica: u32,
    kind: StreamKind,
) -> Result<PRMSample<T>> {
    if !(horizon > T::zero()) || !horizon.is_finite() {
        return Err(Error::InvalidParameter("the horizon must be positive and finite".into()));
    }
    if shell_cutoff > u16::MAX as ShellIndex {
        return Err(Error::InvalidParameter(format!(
            "shell cutoff {shell_cutoff} exceeds the stream-addressing limit {}",
            u16::MAX
        )));
    }
    let mut atoms: Vec<MarkedAtom<T>> = Vec::new();
    for shell in 0..=shell_cutoff {
        let intensity = (horizon * nu.shell_mass(disk, shell)?).to_f64_lossy();
        if intensity == 0.0 {
            continue;
        }
        let mut rng = stream(seed, replica, kind, shell as u16);
        let count = Poisson::new(intensity)
            .map_err(|e| Error::InvalidParameter(format!("bad shell intensity: {e}")))?
            .sample(&mut rng) as u64;
        for _ in 0..count {
            let u = T::from_f64_lossy(rng.random::<f64>());
            let time = horizon * (T::one() - u); // (0, horizon]
            let mark = nu.sample_shell(disk, shell, &mut rng)?;
            atoms.push(MarkedAtom { time, shell, mark });
        }
    }
    atoms.sort_by(|a, b| {
        a.time
            .partial_cmp(&b.time)
            .unwrap()
            .then(a.shell.cmp(&b.shell))
    });
    Ok(PRMSample { horizon, shell_cutoff, atoms })
}

impl<T: Scalar> PRMSample<T> {
    /// Rebuild a sample from raw parts (e.g. parsed from CSV). Atoms may
    /// arrive in any order; they are validated and re-sorted.
    pub fn from_parts(
        horizon: T,
        shell_cutoff: ShellIndex,
        mut atoms: Vec<MarkedAtom<T>>,
    ) -> Result<Self> {
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidParameter("the horizon must be positive and finite".into()));
        }
        let dim = atoms.first().map(|a| a.mark.len());
        for a in &atoms {
            if !(a.time > T::zero()) || a.time > horizon {
                return Err(Error::TimeOutOfRange {
                    t: a.time.to_f64_lossy(),
                    lo: 0.0,
                    hi: horizon.to_f64_lossy(),
                });
            }
            if a.shell > shell_cutoff {
                return Err(Error::ShellOutOfRange { requested: a.shell, cutoff: shell_cutoff });
            }
            if Some(a.mark.len()) != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim.unwrap(),
                    got: a.mark.len(),
                });
            }
        }
        atoms.sort_by(|a, b| {
            a.time
                .partial_cmp(&b.time)
                .unwrap()
                .then(a.shell.cmp(&b.shell))
        });
        Ok(PRMSample { horizon, shell_cutoff, atoms })
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn shell_cutoff(&self) -> ShellIndex {
        self.shell_cutoff
    }

    pub fn atoms(&self) -> &[MarkedAtom<T>] {
        &self.atoms
    }

    /// Number of atoms in `(t1, t2] × shells`.
    pub fn count(&self, window: (T, T), shells: &[ShellIndex]) -> Result<u64> {
        let (t1, t2) = window;
        if t1 < T::zero() || t2 > self.horizon || t1 > t2 {
            return Err(Error::TimeOutOfRange {
                t: t1.to_f64_lossy(),
                lo: 0.0,
                hi: self.horizon.to_f64_lossy(),
            });
        }
        Ok(self
            .atoms
            .iter()
            .filter(|a| a.time > t1 && a.time <= t2 && shells.contains(&a.shell))
            .count() as u64)
    }

    /// The compound-Poisson part carried by the jumps outside the disk
    /// (shell 0): piecewise constant, no compensation.
    pub fn large_jump_path(&self, dim: usize) -> Result<CadlagPath<T>> {
        self.accumulate(dim, 0..=0, None)
    }

    /// One compensated term of the small-jump series: the shell-`n` jumps
    /// minus their linear-in-time compensator, a martingale on the horizon.
    ///
    /// Shell 0 is rejected — its jumps live outside the disk where the
    /// compensator integral is not part of the construction — as is any
    /// shell beyond this sample's cutoff, which was never drawn.
    pub fn compensated_shell_term(
        &self,
        nu: &LevyMeasureSpec<T>,
        disk: &BanachDisk<T>,
        n: ShellIndex,
    ) -> Result<CadlagPath<T>> {
        if n == 0 {
            return Err(Error::ResidualShellCompensator);
        }
        if n > self.shell_cutoff {
            return Err(Error::ShellOutOfRange { requested: n, cutoff: self.shell_cutoff });
        }
        let comp = nu.shell_compensator(disk, n)?;
        self.accumulate(comp.len(), n..=n, Some(comp))
    }

    /// Partial sums of the compensated series at the requested truncation
    /// levels, all on one shared knot set, with the sup-gap between
    /// consecutive levels and the per-level analytic tail-variance bound.
    pub fn compensated_series(
        &self,
        nu: &LevyMeasureSpec<T>,
        disk: &BanachDisk<T>,
        levels: &[ShellIndex],
    ) -> Result<CompensatedSeries<T>> {
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
        let deepest = *levels.last().unwrap();
        if deepest > self.shell_cutoff {
            return Err(Error::ShellOutOfRange { requested: deepest, cutoff: self.shell_cutoff });
        }
        let dim = nu.dim();

        // shared knots: every jump time of every shell up to the deepest level
        let mut knots = vec![T::zero()];
        knots.extend(
            self.atoms
                .iter()
                .filter(|a| a.shell >= 1 && a.shell <= deepest)
                .map(|a| a.time),
        );
        knots.push(self.horizon);
        knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        knots.dedup();

        let mut partial_sums = Vec::with_capacity(levels.len());
        let mut comp = vec![T::zero(); dim];
        let mut tail_variance_bounds = Vec::with_capacity(levels.len());
        for &level in levels {
            // compensator of all shells up to this level
            for n in (if partial_sums.is_empty() { 1 } else { levels[partial_sums.len() - 1] + 1 })
                ..=level
            {
                let c = nu.shell_compensator(disk, n)?;
                comp = add(&comp, &c);
            }
            partial_sums.push(self.sum_on_knots(&knots, dim, 1..=level, &comp)?);
            tail_variance_bounds.push(self.horizon * nu.tail_second_moment(disk, level)?);
        }
        let mut sup_gaps = Vec::with_capacity(levels.len().saturating_sub(1));
        for pair in partial_sums.windows(2) {
            sup_gaps.push(sup_gauge_distance(&pair[0], &pair[1], disk)?);
        }
        Ok(CompensatedSeries {
            levels: levels.to_vec(),
            partial_sums,
            sup_gaps,
            tail_variance_bounds,
        })
    }

    /// Accumulate the atoms of a shell range into a path, optionally
    /// subtracting `t · comp`.
    fn accumulate(
        &self,
        dim: usize,
        shells: std::ops::RangeInclusive<ShellIndex>,
        comp: Option<Vec<T>>,
    ) -> Result<CadlagPath<T>> {
        let mut knots = vec![T::zero()];
        knots.extend(self.atoms.iter().filter(|a| shells.contains(&a.shell)).map(|a| a.time));
        knots.push(self.horizon);
        knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        knots.dedup();
        let comp = comp.unwrap_or_else(|| vec![T::zero(); dim]);
        self.sum_on_knots(&knots, dim, shells, &comp)
    }

    /// Values `Σ_{marks ≤ t} − t·comp` on the given knots; marks of distinct
    /// atoms at the same knot coalesce into one jump record.
    fn sum_on_knots(
        &self,
        knots: &[T],
        dim: usize,
        shells: std::ops::RangeInclusive<ShellIndex>,
        comp: &[T],
    ) -> Result<CadlagPath<T>> {
        let selected: Vec<&MarkedAtom<T>> =
            self.atoms.iter().filter(|a| shells.contains(&a.shell)).collect();
        for a in &selected {
            if a.mark.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: a.mark.len() });
            }
        }
        let jumps = coalesce_marks(&selected);
        accumulate_jumps(knots, dim, &jumps, comp)
    }
}

/// Merge time-sorted atoms into jump records, summing marks that share a
/// time. A sum cancelling to exactly zero is dropped — a zero delta is not a
/// jump.
pub fn coalesce_marks<T: Scalar>(atoms: &[&MarkedAtom<T>]) -> Vec<JumpRecord<T>> {
    let mut jumps: Vec<JumpRecord<T>> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match jumps.last_mut() {
            Some(last) if last.time == a.time => {
                last.delta = add(&last.delta, &a.mark);
            }
            _ => jumps.push(JumpRecord { time: a.time, delta: a.mark.clone() }),
        }
    }
    jumps.retain(|j| !crate::linalg::is_zero(&j.delta));
    jumps
}

/// Truncated small-jump series at several levels, on one knot set.
#[derive(Debug, Clone)]
pub struct CompensatedSeries<T> {
    /// Truncation levels, strictly increasing.
    pub levels: Vec<ShellIndex>,
    /// `J^N` for each level, sharing knots so they can be compared pointwise.
    pub partial_sums: Vec<CadlagPath<T>>,
    /// `sup_t ‖J^{N_{i+1}}_t − J^{N_i}_t‖_K` for consecutive levels.
    pub sup_gaps: Vec<T>,
    /// `horizon · Σ_{n > N_i} ∫_{C_n} ‖x‖_K² dν` — the variance of everything
    /// the truncation at level `N_i` leaves out. Differences of consecutive
    /// entries bound the gap variances.
    pub tail_variance_bounds: Vec<T>,
}

// ---------------------------------------------------------------------------
// CSV serialization: `replica,time,shell,mark_0..mark_{d-1}`, one row per
// atom. The horizon, cutoff and replica count are configuration, not data,
// so the reader takes them as arguments; replicas with no atoms simply have
// no rows.
// ---------------------------------------------------------------------------

pub fn write_prm_csv<T: Scalar, W: Write>(out: W, samples: &[PRMSample<T>]) -> Result<()> {
    let dim = samples
        .iter()
        .flat_map(|s| s.atoms.first())
        .map(|a| a.mark.len())
        .next();
    let dim = match dim {
        Some(d) => d,
        // no atoms anywhere: nothing to write but the header still needs a
        // width; pick 1 so the file parses back
        None => 1,
    };
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["replica".to_string(), "time".to_string(), "shell".to_string()];
    header.extend((0..dim).map(|i| format!("mark_{i}")));
    w.write_record(&header)?;
    for (replica, s) in samples.iter().enumerate() {
        for a in &s.atoms {
            let mut row = Vec::with_capacity(3 + dim);
            row.push(replica.to_string());
            row.push(a.time.to_string());
            row.push(a.shell.to_string());
            row.extend(a.mark.iter().map(|m| m.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_prm_csv<T: Scalar, R: Read>(
    input: R,
    horizon: T,
    shell_cutoff: ShellIndex,
    replicas: usize,
) -> Result<Vec<PRMSample<T>>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let dim = headers.iter().filter(|h| h.starts_with("mark_")).count();
    if dim == 0 || headers.len() != 3 + dim {
        return Err(Error::Parse("unrecognized jump-measure CSV header".into()));
    }
    let mut per_replica: Vec<Vec<MarkedAtom<T>>> = vec![Vec::new(); replicas];
    for record in reader.records() {
        let record = record?;
        let replica: usize = record[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad replica index {:?}", &record[0])))?;
        if replica >= replicas {
            return Err(Error::Parse(format!(
                "replica {replica} out of range; expected fewer than {replicas}"
            )));
        }
        let time = record[1]
            .parse::<T>()
            .map_err(|_| Error::Parse(format!("bad time {:?}", &record[1])))?;
        let shell: ShellIndex = record[2]
            .parse()
            .map_err(|_| Error::Parse(format!("bad shell {:?}", &record[2])))?;
        let mut mark = Vec::with_capacity(dim);
        for i in 0..dim {
            mark.push(
                record[3 + i]
                    .parse::<T>()
                    .map_err(|_| Error::Parse(format!("bad mark {:?}", &record[3 + i])))?,
            );
        }
        per_replica[replica].push(MarkedAtom { time, shell, mark });
    }
    per_replica
        .into_iter()
        .map(|atoms| PRMSample::from_parts(horizon, shell_cutoff, atoms))
        .collect()
}
