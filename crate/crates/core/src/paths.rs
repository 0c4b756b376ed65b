//! Càdlàg paths on a finite horizon.
//!
//! A path is stored on its evaluation times ("knots"): a strictly increasing
//! time list starting at 0, the value *at* each knot (right-continuous, i.e.
//! post-jump), and a jump list whose times are all knots. Between knots the
//! path is affine toward the next knot's pre-jump value, which is exact for
//! every process this library synthesizes: drift and compensator drifts are
//! linear, the Wiener part is sampled at its grid and interpolated by
//! convention, and pure-jump parts are flat between jumps.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::linalg::{add, axpy, is_zero, sub};
use crate::measure::LevyMeasureSpec;
use crate::scalar::Scalar;
use crate::space::{shell_of_gauge, BanachDisk, ShellIndex, SpaceModel};

#[derive(Debug, Clone, PartialEq)]
pub struct JumpRecord<T> {
    pub time: T,
    pub delta: Vec<T>,
}

/// Piecewise-affine càdlàg path; see the module docs for the representation.
#[derive(Debug, Clone, PartialEq)]
pub struct CadlagPath<T> {
    times: Vec<T>,
    values: Vec<Vec<T>>,
    jumps: Vec<JumpRecord<T>>,
}

impl<T: Scalar> CadlagPath<T> {
    /// Build and validate a path.
    ///
    /// Requirements: at least one knot, `times[0] = 0`, strictly increasing
    /// times, one value per knot with a consistent dimension, value zero at
    /// time zero, and jumps sorted by strictly increasing positive times
    /// that all appear among the knots with nonzero deltas.
    pub fn new(times: Vec<T>, values: Vec<Vec<T>>, jumps: Vec<JumpRecord<T>>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidParameter("a path needs at least one knot".into()));
        }
        if times[0] != T::zero() {
            return Err(Error::InvalidParameter("paths start at time 0".into()));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidParameter("knot times must increase strictly".into()));
            }
        }
        if values.len() != times.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), got: values.len() });
        }
        let dim = values[0].len();
        if dim == 0 {
            return Err(Error::InvalidParameter("path dimension must be ≥ 1".into()));
        }
        for v in &values {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
            }
        }
        if !is_zero(&values[0]) {
            return Err(Error::InvalidParameter("process paths start at the origin".into()));
        }
        let mut prev: Option<T> = None;
        for j in &jumps {
            if j.delta.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: j.delta.len() });
            }
            if is_zero(&j.delta) {
                return Err(Error::InvalidParameter("jump deltas must be nonzero".into()));
            }
            if !(j.time > T::zero()) {
                return Err(Error::InvalidParameter("jumps happen strictly after time 0".into()));
            }
            if let Some(p) = prev {
                if !(j.time > p) {
                    return Err(Error::InvalidParameter(
                        "jump times must be strictly increasing".into(),
                    ));
                }
            }
            prev = Some(j.time);
            if times.binary_search_by(|t| t.partial_cmp(&j.time).unwrap()).is_err() {
                return Err(Error::InvalidParameter(format!(
                    "jump time {} is not an evaluation knot",
                    j.time
                )));
            }
        }
        Ok(CadlagPath { times, values, jumps })
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn horizon(&self) -> T {
        *self.times.last().unwrap()
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn jumps(&self) -> &[JumpRecord<T>] {
        &self.jumps
    }

    fn delta_at_knot(&self, knot: usize) -> Option<&JumpRecord<T>> {
        let t = self.times[knot];
        self.jumps
            .binary_search_by(|j| j.time.partial_cmp(&t).unwrap())
            .ok()
            .map(|i| &self.jumps[i])
    }

    fn locate(&self, t: T) -> Result<std::result::Result<usize, usize>> {
        if t < T::zero() || t > self.horizon() {
            return Err(Error::TimeOutOfRange {
                t: t.to_f64_lossy(),
                lo: 0.0,
                hi: self.horizon().to_f64_lossy(),
            });
        }
        Ok(self.times.binary_search_by(|k| k.partial_cmp(&t).unwrap()))
    }

    /// Right-continuous evaluation: the value with all jumps at times ≤ `t`
    /// applied; affine between knots.
    pub fn value_at(&self, t: T) -> Result<Vec<T>> {
        match self.locate(t)? {
            Ok(k) => Ok(self.values[k].clone()),
            Err(ins) => Ok(self.interpolate(ins, t)),
        }
    }

    /// Left limit at `t > 0`: the value just before `t`, i.e. `value_at(t)`
    /// minus the jump at `t` if there is one.
    pub fn left_limit(&self, t: T) -> Result<Vec<T>> {
        if t == T::zero() {
            return Err(Error::LeftLimitAtZero);
        }
        match self.locate(t)? {
            Ok(k) => match self.delta_at_knot(k) {
                Some(j) => Ok(sub(&self.values[k], &j.delta)),
                None => Ok(self.values[k].clone()),
            },
            Err(ins) => Ok(self.interpolate(ins, t)),
        }
    }

    /// Affine interpolation on the open segment before knot `ins`
    /// (`times[ins-1] < t < times[ins]`), targeting the pre-jump value of
    /// the right knot so no jump leaks backward in time.
    fn interpolate(&self, ins: usize, t: T) -> Vec<T> {
        debug_assert!(ins > 0 && ins < self.times.len());
        let (tl, tr) = (self.times[ins - 1], self.times[ins]);
        let w = (t - tl) / (tr - tl);
        let left = &self.values[ins - 1];
        let jump = self.delta_at_knot(ins);
        (0..self.dim())
            .map(|i| {
                let right = match jump {
                    Some(j) => self.values[ins][i] - j.delta[i],
                    None => self.values[ins][i],
                };
                left[i] + w * (right - left[i])
            })
            .collect()
    }

    /// Number of jumps `(s, ΔX_s)` with `t1 < s ≤ t2` whose delta falls in
    /// one of the requested shells of `disk`.
    pub fn count_measure(
        &self,
        window: (T, T),
        shells: &[ShellIndex],
        disk: &BanachDisk<T>,
    ) -> Result<u64> {
        let (t1, t2) = window;
        if t1 < T::zero() || t2 > self.horizon() || t1 > t2 {
            return Err(Error::TimeOutOfRange {
                t: t1.to_f64_lossy(),
                lo: 0.0,
                hi: self.horizon().to_f64_lossy(),
            });
        }
        let mut count = 0u64;
        for j in &self.jumps {
            if j.time > t1 && j.time <= t2 && shells.contains(&disk.shell_index(&j.delta)?) {
                count += 1;
            }
        }
        Ok(count)
    }

    /// Compensated jump count over a time window: the raw count minus the
    /// product-measure intensity `(t2 − t1) · Σ_n ν(C_n)` of the requested
    /// shells.
    pub fn compensated_count(
        &self,
        window: (T, T),
        shells: &[ShellIndex],
        nu: &LevyMeasureSpec<T>,
        disk: &BanachDisk<T>,
    ) -> Result<T> {
        let count = self.count_measure(window, shells, disk)?;
        let mut intensity = T::zero();
        let mut seen = std::collections::BTreeSet::new();
        for &n in shells {
            if seen.insert(n) {
                intensity = intensity + nu.shell_mass(disk, n)?;
            }
        }
        let dt = window.1 - window.0;
        Ok(T::from_u64(count).unwrap() - dt * intensity)
    }

    /// Number the jumps by weak-metric size class.
    ///
    /// Class 1 collects sizes in `(1/2, ∞)`; class `n ≥ 2` collects sizes in
    /// `(1/(n+1), 1/n]`. Within a class, times are in increasing order.
    pub fn jump_numbering(&self, model: &SpaceModel<T>) -> Result<JumpNumbering<T>> {
        let zero = vec![T::zero(); self.dim()];
        let mut classes: BTreeMap<u32, Vec<T>> = BTreeMap::new();
        for j in &self.jumps {
            let size = model.weak_distance(&j.delta, &zero)?;
            if size == T::zero() {
                // cannot happen for nonzero deltas and positive weights
                continue;
            }
            let class = shell_of_gauge(size).max(1);
            classes.entry(class).or_default().push(j.time);
        }
        Ok(JumpNumbering { classes })
    }

    /// Re-knot onto a superset of the current knots (same horizon).
    ///
    /// Values at the added knots come from `value_at`, which is exact for
    /// the piecewise-affine paths this library produces, and the jump list
    /// is untouched — so this refines a path without changing it as a
    /// function of time.
    pub fn with_knots(&self, knots: &[T]) -> Result<Self> {
        // superset check by a single merge walk
        let mut old = self.times.iter().peekable();
        for t in knots {
            if old.peek() == Some(&t) {
                old.next();
            }
        }
        if old.peek().is_some() {
            return Err(Error::InvalidParameter(
                "re-knotting requires a superset of the existing knots".into(),
            ));
        }
        let mut values = Vec::with_capacity(knots.len());
        for &t in knots {
            values.push(self.value_at(t)?);
        }
        CadlagPath::new(knots.to_vec(), values, self.jumps.clone())
    }

    /// Greedy partition `0 = t_0 < t_1 < … < t_k = horizon` such that the
    /// oscillation of the path over the knots in each half-open interval
    /// `[t_{i-1}, t_i)` stays below `epsilon`.
    ///
    /// Oscillation is measured as the largest pairwise `metric` distance of
    /// the knot values inside the interval; a jump of size ≥ ε therefore
    /// forces a breakpoint exactly at the jump time.
    pub fn oscillation_partition(
        &self,
        epsilon: T,
        metric: &PathMetric<'_, T>,
    ) -> Result<Vec<T>> {
        if !(epsilon > T::zero()) {
            return Err(Error::InvalidParameter("oscillation tolerance must be positive".into()));
        }
        let mut breaks = vec![T::zero()];
        let mut window: Vec<&Vec<T>> = vec![&self.values[0]];
        let mut osc = T::zero();
        for k in 1..self.times.len() {
            let v = &self.values[k];
            let mut cand = osc;
            for w in &window {
                cand = cand.max(metric.distance(v, w)?);
            }
            if cand >= epsilon {
                breaks.push(self.times[k]);
                window.clear();
                window.push(v);
                osc = T::zero();
            } else {
                window.push(v);
                osc = cand;
            }
        }
        if *breaks.last().unwrap() != self.horizon() {
            breaks.push(self.horizon());
        }
        Ok(breaks)
    }
}

/// Which seminorm to measure path oscillation in.
pub enum PathMetric<'a, T> {
    /// Gauge norm of the difference, `‖x − y‖_K`.
    Gauge(&'a BanachDisk<T>),
    /// The weak coordinatewise metric of a space model.
    Weak(&'a SpaceModel<T>),
}

impl<T: Scalar> PathMetric<'_, T> {
    pub fn distance(&self, x: &[T], y: &[T]) -> Result<T> {
        match self {
            PathMetric::Gauge(disk) => disk.gauge_norm(&sub(x, y)),
            PathMetric::Weak(model) => model.weak_distance(x, y),
        }
    }
}

/// Jump times grouped into weak-metric size classes.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpNumbering<T> {
    classes: BTreeMap<u32, Vec<T>>,
}

impl<T: Scalar> JumpNumbering<T> {
    /// `k`-th jump time (0-based) of size class `class`; `+∞` once the class
    /// is exhausted, so callers can walk `k = 0, 1, 2, …` without bounds
    /// checks.
    pub fn time(&self, class: u32, k: usize) -> T {
        self.classes
            .get(&class)
            .and_then(|times| times.get(k))
            .copied()
            .unwrap_or_else(T::infinity)
    }

    pub fn class_len(&self, class: u32) -> usize {
        self.classes.get(&class).map_or(0, Vec::len)
    }

    pub fn classes(&self) -> &BTreeMap<u32, Vec<T>> {
        &self.classes
    }
}

/// Build the path `Σ_{τ ≤ t} δ_τ − t·comp` on the given knots: a jump
/// accumulator with a linear compensator drift.
///
/// Every jump time must be a knot. Synthesis and re-analysis of a
/// decomposition both go through this one function, so a path rebuilt from
/// the same jump records is bit-for-bit identical.
pub fn accumulate_jumps<T: Scalar>(
    knots: &[T],
    dim: usize,
    jumps: &[JumpRecord<T>],
    comp: &[T],
) -> Result<CadlagPath<T>> {
    if comp.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: comp.len() });
    }
    let mut values = Vec::with_capacity(knots.len());
    let mut cum = vec![T::zero(); dim];
    let mut next = jumps.iter().peekable();
    for &t in knots {
        while let Some(j) = next.peek() {
            if j.time > t {
                break;
            }
            if j.time < t {
                return Err(Error::InvalidParameter(
                    "every jump time must appear among the knots".into(),
                ));
            }
            cum = add(&cum, &j.delta);
            next.next();
        }
        let mut v = cum.clone();
        axpy(&mut v, -t, comp);
        values.push(v);
    }
    if next.peek().is_some() {
        return Err(Error::InvalidParameter(
            "jump records extend beyond the last knot".into(),
        ));
    }
    CadlagPath::new(knots.to_vec(), values, jumps.to_vec())
}

/// Supremum over the whole horizon of `‖a_t − b_t‖_K` for two paths sharing
/// the same knots.
///
/// Between knots the difference is affine, so the supremum over a segment is
/// attained at its ends; the left end of a segment into a jump knot is the
/// *left limit* there, which is checked as well.
pub fn sup_gauge_distance<T: Scalar>(
    a: &CadlagPath<T>,
    b: &CadlagPath<T>,
    disk: &BanachDisk<T>,
) -> Result<T> {
    if a.times() != b.times() {
        return Err(Error::InvalidParameter(
            "sup distance needs paths on the same knot set".into(),
        ));
    }
    let mut sup = T::zero();
    for (k, t) in a.times().iter().enumerate() {
        let d = sub(&a.values()[k], &b.values()[k]);
        sup = sup.max(disk.gauge_norm(&d)?);
        if k > 0 {
            let dl = sub(&a.left_limit(*t)?, &b.left_limit(*t)?);
            sup = sup.max(disk.gauge_norm(&dl)?);
        }
    }
    Ok(sup)
}

/// Flag grid-to-grid moves larger than `threshold` (in gauge) as jumps.
///
/// This is a heuristic for externally produced, grid-only data in which jump
/// times were not recorded: a diffusion move of that size is merely unlikely,
/// not impossible, and a true jump smaller than the threshold is missed.
/// Synthesized paths carry exact jump lists and never need this.
pub fn detect_jumps<T: Scalar>(
    times: &[T],
    values: &[Vec<T>],
    disk: &BanachDisk<T>,
    threshold: T,
) -> Result<Vec<JumpRecord<T>>> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), got: values.len() });
    }
    if !(threshold > T::zero()) {
        return Err(Error::InvalidParameter("jump threshold must be positive".into()));
    }
    let mut jumps = Vec::new();
    for k in 1..times.len() {
        let delta = sub(&values[k], &values[k - 1]);
        if disk.gauge_norm(&delta)? > threshold {
            jumps.push(JumpRecord { time: times[k], delta });
        }
    }
    Ok(jumps)
}

// ---------------------------------------------------------------------------
// CSV serialization
//
// One row per knot: `replica,t,kind,value_0..value_{d-1},delta_0..delta_{d-1}`
// with kind ∈ {grid, jump} and all-zero deltas on grid rows. Floats are
// written in shortest round-trip form, so a write/read cycle reproduces every
// bit.
// ---------------------------------------------------------------------------

pub fn write_paths_csv<T: Scalar, W: Write>(out: W, paths: &[CadlagPath<T>]) -> Result<()> {
    let dim = match paths.first() {
        Some(p) => p.dim(),
        None => return Err(Error::InvalidParameter("no paths to serialize".into())),
    };
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["replica".to_string(), "t".to_string(), "kind".to_string()];
    header.extend((0..dim).map(|i| format!("value_{i}")));
    header.extend((0..dim).map(|i| format!("delta_{i}")));
    w.write_record(&header)?;

    let zero = T::zero().to_string();
    for (replica, path) in paths.iter().enumerate() {
        if path.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: path.dim() });
        }
        for (k, t) in path.times.iter().enumerate() {
            let jump = path.delta_at_knot(k);
            let mut row = Vec::with_capacity(3 + 2 * dim);
            row.push(replica.to_string());
            row.push(t.to_string());
            row.push(if jump.is_some() { "jump" } else { "grid" }.to_string());
            for v in &path.values[k] {
                row.push(v.to_string());
            }
            match jump {
                Some(j) => row.extend(j.delta.iter().map(|d| d.to_string())),
                None => row.extend(std::iter::repeat_n(zero.clone(), dim)),
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_paths_csv<T: Scalar, R: Read>(input: R) -> Result<Vec<CadlagPath<T>>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let dim = headers.iter().filter(|h| h.starts_with("value_")).count();
    if dim == 0 || headers.len() != 3 + 2 * dim {
        return Err(Error::Parse("unrecognized path CSV header".into()));
    }

    struct Partial<T> {
        times: Vec<T>,
        values: Vec<Vec<T>>,
        jumps: Vec<JumpRecord<T>>,
    }
    let mut finished: Vec<CadlagPath<T>> = Vec::new();
    let mut current: Option<(u64, Partial<T>)> = None;

    let flush = |cur: Option<(u64, Partial<T>)>, out: &mut Vec<CadlagPath<T>>| -> Result<()> {
        if let Some((replica, p)) = cur {
            if out.len() as u64 != replica {
                return Err(Error::Parse(format!(
                    "replica indices must be contiguous from 0; saw {replica} at position {}",
                    out.len()
                )));
            }
            out.push(CadlagPath::new(p.times, p.values, p.jumps)?);
        }
        Ok(())
    };

    for record in reader.records() {
        let record = record?;
        let replica: u64 = record[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad replica index {:?}", &record[0])))?;
        let t = parse_scalar::<T>(&record[1])?;
        let kind = &record[2];
        let mut value = Vec::with_capacity(dim);
        for i in 0..dim {
            value.push(parse_scalar::<T>(&record[3 + i])?);
        }
        let is_new_path = match &current {
            Some((r, _)) => *r != replica,
            None => true,
        };
        if is_new_path {
            flush(current.take(), &mut finished)?;
            current = Some((replica, Partial { times: vec![], values: vec![], jumps: vec![] }));
        }
        let (_, partial) = current.as_mut().unwrap();
        match kind {
            "grid" => {}
            "jump" => {
                let mut delta = Vec::with_capacity(dim);
                for i in 0..dim {
                    delta.push(parse_scalar::<T>(&record[3 + dim + i])?);
                }
                partial.jumps.push(JumpRecord { time: t, delta });
            }
            other => return Err(Error::Parse(format!("unknown row kind {other:?}"))),
        }
        partial.times.push(t);
        partial.values.push(value);
    }
    flush(current.take(), &mut finished)?;
    if finished.is_empty() {
        return Err(Error::Parse("path CSV contains no rows".into()));
    }
    Ok(finished)
}

fn parse_scalar<T: Scalar>(s: &str) -> Result<T> {
    s.parse::<T>().map_err(|_| Error::Parse(format!("bad number {s:?}")))
}
