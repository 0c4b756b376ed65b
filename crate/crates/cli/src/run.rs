//! The five commands. `simulate` writes artifacts, `verify` reads them back
//! and runs the statistical battery, `decompose` splits stored paths into
//! their summands, `reduce-check` runs the order search, and `report`
//! merges and prints everything.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use levyito::charfn::cf_compare;
use levyito::decomp::{
    analyze, gaussianity_check, independence_stat, reducibility_check, ComponentId,
    ReducibilityBudget, Synthesizer, Transform,
};
use levyito::gaussian::moment_check;
use levyito::jumprm::{read_prm_csv, write_prm_csv};
use levyito::linalg::scale;
use levyito::paths::{read_paths_csv, write_paths_csv, CadlagPath};
use levyito::report::{
    ConvergenceEntry, CountEntry, CovarianceEntry, GaussianityEntry, IndependenceEntry,
    ReducibilityEntry, RunReport, Verdict,
};
use levyito::{CadlagPathF64, ComponentBundleF64, PRMSampleF64};

use crate::config::{Experiment, ExperimentConfig};
use crate::CliError;

const PATHS_FILE: &str = "paths.csv";
const PRM_FILE: &str = "prm.csv";
const MANIFEST_FILE: &str = "manifest.json";
const REPORT_FILE: &str = "report.json";
const REDUCIBILITY_FILE: &str = "reducibility.json";

const COMPONENT_PAIRS: [(ComponentId, ComponentId); 3] = [
    (ComponentId::Wiener, ComponentId::SmallJumps),
    (ComponentId::Wiener, ComponentId::LargeJumps),
    (ComponentId::SmallJumps, ComponentId::LargeJumps),
];

/// Identity card of an artifact directory. The explicit fields say *which
/// dataset* this is (shape, seed, replica count); the hash records the full
/// configuration for provenance. Deliberately contains nothing volatile
/// (no timestamps, no host data): two runs of the same configuration must
/// be byte-identical.
#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config_hash: String,
    seed: u64,
    replicas: usize,
    dim: usize,
    horizon: f64,
    grid_steps: usize,
    shell_cutoff: u32,
    paths_file: String,
    prm_file: String,
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(runtime)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(runtime)
}

fn read_manifest(out: &Path) -> Result<Option<Manifest>, CliError> {
    let path = out.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map(Some).map_err(runtime)
}

fn synthesize_all(exp: &Experiment) -> Result<Vec<ComponentBundleF64>, CliError> {
    let syn = Synthesizer::new(exp.chars.clone(), exp.grid.clone(), exp.shell_cutoff)
        .map_err(|e| CliError::Config(e.to_string()))?;
    // one stream address per replica: the outcome is identical however the
    // replicas are distributed over threads
    (0..exp.replicas as u32)
        .into_par_iter()
        .map(|r| syn.synthesize(exp.seed, r).map_err(runtime))
        .collect()
}

pub fn simulate(config: &ExperimentConfig, out: &Path) -> Result<i32, CliError> {
    let exp = config.build()?;
    let bundles = synthesize_all(&exp)?;
    fs::create_dir_all(out).map_err(runtime)?;

    let xs: Vec<&CadlagPathF64> = bundles.iter().map(|b| &b.x).collect();
    let xs_owned: Vec<CadlagPathF64> = xs.into_iter().cloned().collect();
    let mut paths_buf = Vec::new();
    write_paths_csv(&mut paths_buf, &xs_owned).map_err(runtime)?;
    fs::write(out.join(PATHS_FILE), paths_buf).map_err(runtime)?;

    let prms: Vec<PRMSampleF64> = bundles.into_iter().map(|b| b.prm).collect();
    let mut prm_buf = Vec::new();
    write_prm_csv(&mut prm_buf, &prms).map_err(runtime)?;
    fs::write(out.join(PRM_FILE), prm_buf).map_err(runtime)?;

    let manifest = Manifest {
        config_hash: config.canonical_hash(),
        seed: exp.seed,
        replicas: exp.replicas,
        dim: exp.chars.dim(),
        horizon: exp.horizon,
        grid_steps: exp.grid.len() - 1,
        shell_cutoff: exp.shell_cutoff,
        paths_file: PATHS_FILE.to_string(),
        prm_file: PRM_FILE.to_string(),
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    println!(
        "simulated {} replicas on [0, {}] into {}",
        exp.replicas,
        exp.horizon,
        out.display()
    );
    Ok(0)
}

/// Refuse artifacts whose dataset identity — shape, seed, replica count —
/// disagrees with the configuration. Model parameters (drift, Q, measure)
/// are deliberately *not* part of this check: testing stored paths against
/// a changed model is exactly what `verify` is for, and a wrong model shows
/// up as a statistical failure, not a refusal.
fn check_identity(manifest: &Manifest, exp: &Experiment, out: &Path) -> Result<(), CliError> {
    let fields: [(&str, f64, f64); 6] = [
        ("space.dim", manifest.dim as f64, exp.chars.dim() as f64),
        ("simulation.seed", manifest.seed as f64, exp.seed as f64),
        ("simulation.replicas", manifest.replicas as f64, exp.replicas as f64),
        ("time.horizon", manifest.horizon, exp.horizon),
        ("time.grid_steps", manifest.grid_steps as f64, (exp.grid.len() - 1) as f64),
        ("simulation.shell_cutoff", manifest.shell_cutoff as f64, exp.shell_cutoff as f64),
    ];
    for (name, stored, configured) in fields {
        if stored != configured {
            return Err(CliError::Config(format!(
                "{name} = {configured} does not match the artifacts in {} ({name} = {stored}); \
                 rerun `simulate` or point at the right directory",
                out.display()
            )));
        }
    }
    Ok(())
}

fn load_artifacts(
    manifest: &Manifest,
    exp: &Experiment,
    out: &Path,
) -> Result<(Vec<CadlagPathF64>, Vec<PRMSampleF64>), CliError> {
    let paths_raw = fs::read(out.join(&manifest.paths_file)).map_err(runtime)?;
    let xs: Vec<CadlagPathF64> = read_paths_csv(paths_raw.as_slice()).map_err(runtime)?;
    if xs.len() != exp.replicas {
        return Err(CliError::Runtime(format!(
            "expected {} paths, found {}",
            exp.replicas,
            xs.len()
        )));
    }
    let prm_raw = fs::read(out.join(&manifest.prm_file)).map_err(runtime)?;
    let prms = read_prm_csv(
        prm_raw.as_slice(),
        exp.horizon,
        exp.shell_cutoff,
        exp.replicas,
    )
    .map_err(runtime)?;
    Ok((xs, prms))
}

/// Rebuild full component bundles from stored paths: jump parts by shell
/// classification, the Wiener part as residual − drift. Works because the
/// drift is deterministic and the stored knots keep every jump time.
fn rebuild_bundles(
    exp: &Experiment,
    xs: Vec<CadlagPathF64>,
    prms: Vec<PRMSampleF64>,
) -> Result<Vec<ComponentBundleF64>, CliError> {
    xs.into_par_iter()
        .zip(prms)
        .map(|(x, prm)| {
            let dec = analyze(&x, exp.chars.nu(), exp.chars.disk(), exp.shell_cutoff)
                .map_err(runtime)?;
            if !dec.residual.jumps().is_empty() {
                return Err(CliError::Runtime(
                    "stored paths contain jumps deeper than the configured shell cutoff".into(),
                ));
            }
            let knots = x.times().to_vec();
            let drift_values: Vec<Vec<f64>> =
                knots.iter().map(|&t| scale(exp.chars.gamma(), t)).collect();
            let w_values: Vec<Vec<f64>> = dec
                .residual
                .values()
                .iter()
                .zip(&drift_values)
                .map(|(r, d)| r.iter().zip(d).map(|(a, b)| a - b).collect())
                .collect();
            let drift = CadlagPath::new(knots.clone(), drift_values, vec![]).map_err(runtime)?;
            let w = CadlagPath::new(knots, w_values, vec![]).map_err(runtime)?;
            Ok(ComponentBundleF64 {
                x,
                drift,
                w,
                j: dec.small_compensated,
                l: dec.large,
                prm,
                truncation: exp.shell_cutoff,
            })
        })
        .collect()
}

pub fn verify(config: &ExperimentConfig, out: &Path) -> Result<i32, CliError> {
    let exp = config.build()?;
    let bundles = match read_manifest(out)? {
        Some(manifest) => {
            check_identity(&manifest, &exp, out)?;
            let (xs, prms) = load_artifacts(&manifest, &exp, out)?;
            rebuild_bundles(&exp, xs, prms)?
        }
        // no stored dataset: draw one in memory and verify that
        None => {
            println!(
                "no artifacts in {}; simulating {} replicas in memory",
                out.display(),
                exp.replicas
            );
            synthesize_all(&exp)?
        }
    };
    fs::create_dir_all(out).map_err(runtime)?;
    let mut failures: Vec<String> = Vec::new();
    let tol = exp.tolerance_z;

    // marginals against the analytic characteristic function
    let mut cf_checks = Vec::new();
    for &t in &exp.cf_times {
        let samples: Vec<Vec<f64>> = bundles
            .iter()
            .map(|b| b.x.value_at(t))
            .collect::<Result<_, _>>()
            .map_err(runtime)?;
        cf_checks.extend(cf_compare(&exp.chars, &samples, t, &exp.functionals).map_err(runtime)?);
    }
    section_verdict(
        "characteristic function",
        cf_checks.iter().map(|c| c.z_score),
        tol,
        &mut failures,
    );

    // summand independence; a constant summand (zero Q, empty measure)
    // carries no information and counts as vacuously independent
    let mut independence = Vec::new();
    for (i, a) in exp.functionals.iter().enumerate() {
        let transform = Transform::ALL[i % Transform::ALL.len()];
        for &(first, second) in &COMPONENT_PAIRS {
            let (correlation, z) =
                match independence_stat(&bundles, first, second, a, exp.horizon, transform) {
                    Ok(rz) => rz,
                    Err(levyito::Error::DegenerateVariance) => (0.0, 0.0),
                    Err(e) => return Err(runtime(e)),
                };
            independence.push(IndependenceEntry {
                first: first.label().to_string(),
                second: second.label().to_string(),
                functional: i,
                transform: transform.label().to_string(),
                correlation,
                z,
            });
        }
    }
    section_verdict("independence", independence.iter().map(|s| s.z), tol, &mut failures);

    // Gaussianity of the continuous part; a point mass is a degenerate
    // Gaussian, so zero variance passes vacuously
    let mut gaussianity = Vec::new();
    for a in &exp.functionals {
        let samples: Vec<f64> = bundles
            .iter()
            .map(|b| {
                b.w.value_at(exp.horizon)
                    .map(|v| v.iter().zip(a).map(|(x, ai)| x * ai).sum::<f64>())
            })
            .collect::<Result<_, _>>()
            .map_err(runtime)?;
        match gaussianity_check(&samples) {
            Ok(check) => gaussianity.push(GaussianityEntry::from_check(a, exp.horizon, &check)),
            Err(levyito::Error::DegenerateVariance) => gaussianity.push(GaussianityEntry {
                functional: a.clone(),
                time: exp.horizon,
                skewness: 0.0,
                excess_kurtosis: 0.0,
                z_skew: 0.0,
                z_kurt: 0.0,
            }),
            Err(e) => return Err(runtime(e)),
        }
    }
    section_verdict(
        "gaussianity",
        gaussianity.iter().flat_map(|g| [g.z_skew, g.z_kurt]),
        tol,
        &mut failures,
    );

    // Wiener covariance against ⟨Qa,b⟩·min(s,t)
    let w_paths: Vec<CadlagPathF64> = bundles.iter().map(|b| b.w.clone()).collect();
    let s_mid = exp.grid[exp.grid.len() / 2];
    let mut wiener_covariance = Vec::new();
    for i in 0..exp.functionals.len().min(5) {
        let a = &exp.functionals[i];
        let b = &exp.functionals[(i + 1) % exp.functionals.len()];
        let target = exp.chars.q().bilinear(a, b) * s_mid.min(exp.horizon);
        match moment_check(&w_paths, a, s_mid, b, exp.horizon, target) {
            Ok(check) => wiener_covariance
                .push(CovarianceEntry::from_check(a, s_mid, b, exp.horizon, &check)),
            // a dispersion-free sample away from its target cannot be
            // studentized, but it is still plainly wrong
            Err(levyito::Error::DegenerateVariance) => failures.push(format!(
                "wiener covariance: constant sample for functional {i} misses its target {target}"
            )),
            Err(e) => return Err(runtime(e)),
        }
    }
    section_verdict(
        "wiener covariance",
        wiener_covariance.iter().map(|c| c.z),
        tol,
        &mut failures,
    );

    // Poisson sanity of the per-shell counts
    let shell_counts = count_checks(&exp, &bundles, &mut failures).map_err(runtime)?;
    section_verdict(
        "shell counts",
        shell_counts.iter().flat_map(|c| [c.z_mean, c.z_variance]),
        tol,
        &mut failures,
    );

    // convergence of the truncated series
    let convergence = if exp.truncation_levels.len() >= 2 {
        let entry = convergence_check(&exp, &bundles).map_err(runtime)?;
        if !entry.within_bound {
            failures.push("series convergence: mean sup² exceeded the martingale bound".into());
        }
        Some(entry)
    } else {
        None
    };

    let verdict = Verdict { pass: failures.is_empty(), failures };
    let report = RunReport {
        config_hash: config.canonical_hash(),
        seed: exp.seed,
        replicas: exp.replicas,
        horizon: exp.horizon,
        shell_cutoff: exp.shell_cutoff,
        cf_checks,
        independence,
        gaussianity,
        wiener_covariance,
        shell_counts,
        reducibility: None,
        convergence,
        verdict,
    };
    write_json(&out.join(REPORT_FILE), &report)?;
    print_summary(&report);
    Ok(if report.verdict.pass { 0 } else { 1 })
}

/// A section tolerates the multiplicity-expected number of exceedances
/// (one in ten statistics) before it is declared failed; a lone 4σ outlier
/// among forty statistics is noise, the same outlier among three is not.
fn section_verdict(
    name: &str,
    zs: impl Iterator<Item = f64>,
    tol: f64,
    failures: &mut Vec<String>,
) {
    let zs: Vec<f64> = zs.collect();
    let exceed = zs.iter().filter(|z| !z.is_finite() || z.abs() > tol).count();
    let allowance = zs.len() / 10;
    if exceed > allowance {
        failures.push(format!(
            "{name}: {exceed} of {} statistics beyond |z| = {tol} (allowance {allowance})",
            zs.len()
        ));
    }
}

fn count_checks(
    exp: &Experiment,
    bundles: &[ComponentBundleF64],
    failures: &mut Vec<String>,
) -> levyito::Result<Vec<CountEntry>> {
    let m = bundles.len() as f64;
    let mut entries = Vec::new();
    for shell in 0..=exp.shell_cutoff {
        let lambda = exp.horizon * exp.chars.nu().shell_mass(exp.chars.disk(), shell)?;
        let counts: Vec<f64> = bundles
            .iter()
            .map(|b| b.prm.count((0.0, exp.horizon), &[shell]).map(|c| c as f64))
            .collect::<levyito::Result<_>>()?;
        if lambda == 0.0 {
            // a dead shell admits no z-score, but a jump there is a bug
            if counts.iter().any(|&c| c != 0.0) {
                failures.push(format!("shell counts: jumps observed in massless shell {shell}"));
            }
            continue;
        }
        let mean = counts.iter().sum::<f64>() / m;
        let variance = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (m - 1.0);
        let z_mean = (mean - lambda) / (lambda / m).sqrt();
        let z_variance =
            (variance - lambda) / ((lambda + 2.0 * lambda * lambda) / m).sqrt();
        entries.push(CountEntry { shell, intensity: lambda, mean, variance, z_mean, z_variance });
    }
    Ok(entries)
}

fn convergence_check(
    exp: &Experiment,
    bundles: &[ComponentBundleF64],
) -> levyito::Result<ConvergenceEntry> {
    let levels = &exp.truncation_levels;
    let m = bundles.len() as f64;
    let mut mean_sq = vec![0.0f64; levels.len() - 1];
    let mut bounds = vec![0.0f64; levels.len()];
    for b in bundles {
        let series = b
            .prm
            .compensated_series(exp.chars.nu(), exp.chars.disk(), levels)?;
        for (acc, g) in mean_sq.iter_mut().zip(&series.sup_gaps) {
            *acc += g * g / m;
        }
        bounds = series.tail_variance_bounds;
    }
    let within_bound = mean_sq
        .iter()
        .enumerate()
        .all(|(i, &ms)| ms <= 4.0 * (bounds[i] - bounds[i + 1]));
    Ok(ConvergenceEntry {
        levels: levels.clone(),
        mean_sq_gaps: mean_sq,
        tail_variance_bounds: bounds,
        within_bound,
    })
}

pub fn decompose(config: &ExperimentConfig, out: &Path) -> Result<i32, CliError> {
    let exp = config.build()?;
    let manifest = read_manifest(out)?.ok_or_else(|| {
        CliError::Config(format!(
            "no stored paths to decompose in {}; run `simulate` first",
            out.display()
        ))
    })?;
    check_identity(&manifest, &exp, out)?;
    let (xs, prms) = load_artifacts(&manifest, &exp, out)?;
    let bundles = rebuild_bundles(&exp, xs, prms)?;
    let parts: [(&str, fn(&ComponentBundleF64) -> &CadlagPathF64); 3] = [
        ("large.csv", |b| &b.l),
        ("small.csv", |b| &b.j),
        ("wiener.csv", |b| &b.w),
    ];
    for (file, pick) in parts {
        let paths: Vec<CadlagPathF64> = bundles.iter().map(|b| pick(b).clone()).collect();
        let mut buf = Vec::new();
        write_paths_csv(&mut buf, &paths).map_err(runtime)?;
        fs::write(out.join(file), buf).map_err(runtime)?;
    }
    let total_jumps: usize = bundles.iter().map(|b| b.x.jumps().len()).sum();
    println!(
        "decomposed {} paths ({} jumps) into large.csv, small.csv, wiener.csv",
        bundles.len(),
        total_jumps
    );
    Ok(0)
}

/// `reducibility.json`: the order search result plus the hash of the
/// configuration it answers for.
#[derive(Debug, Serialize, Deserialize)]
struct ReducibilityArtifact {
    config_hash: String,
    #[serde(flatten)]
    entry: ReducibilityEntry,
}

pub fn reduce_check(config: &ExperimentConfig, out: &Path) -> Result<i32, CliError> {
    let exp = config.build()?;
    if exp.truncation_levels.is_empty() {
        return Err(CliError::Config(
            "verification.truncation_levels is empty; nothing to check".into(),
        ));
    }
    let budget = ReducibilityBudget { seed: exp.seed, ..ReducibilityBudget::default() };
    let report = reducibility_check(
        exp.chars.nu(),
        exp.chars.disk(),
        &exp.truncation_levels,
        exp.epsilon,
        &budget,
    )
    .map_err(runtime)?;
    fs::create_dir_all(out).map_err(runtime)?;
    let artifact = ReducibilityArtifact {
        config_hash: config.canonical_hash(),
        entry: (&report).into(),
    };
    write_json(&out.join(REDUCIBILITY_FILE), &artifact)?;
    for (level, order) in report.levels.iter().zip(&artifact.entry.orders) {
        let kind = if order.exact { "exact" } else { "3σ bracket" };
        println!(
            "level {level}: order {}..{} ({kind})",
            order.lower, order.upper
        );
    }
    println!(
        "orders {} across the two deepest levels",
        if report.stabilized { "stabilized" } else { "did NOT stabilize" }
    );
    Ok(0)
}

pub fn report(out: &Path) -> Result<i32, CliError> {
    let path = out.join(REPORT_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    let mut report: RunReport = serde_json::from_str(&text).map_err(runtime)?;

    // splice in the reducibility artifact when present and compatible
    let red_path = out.join(REDUCIBILITY_FILE);
    if red_path.exists() {
        let red_text = fs::read_to_string(&red_path).map_err(runtime)?;
        let artifact: ReducibilityArtifact =
            serde_json::from_str(&red_text).map_err(runtime)?;
        if artifact.config_hash != report.config_hash {
            return Err(CliError::Config(
                "reducibility.json belongs to a different configuration than report.json".into(),
            ));
        }
        report.reducibility = Some(artifact.entry);
        write_json(&path, &report)?;
    }
    print_summary(&report);
    Ok(if report.verdict.pass { 0 } else { 1 })
}

fn print_summary(report: &RunReport) {
    println!(
        "run {} · seed {} · {} replicas",
        &report.config_hash[..12.min(report.config_hash.len())],
        report.seed,
        report.replicas
    );
    let max_z = |it: &mut dyn Iterator<Item = f64>| {
        it.fold(0.0f64, |m, z| if z.is_finite() { m.max(z.abs()) } else { f64::INFINITY })
    };
    if !report.cf_checks.is_empty() {
        println!(
            "  characteristic function: {} checks, max |z| = {:.2}",
            report.cf_checks.len(),
            max_z(&mut report.cf_checks.iter().map(|c| c.z_score))
        );
    }
    if !report.independence.is_empty() {
        println!(
            "  independence: {} statistics, max |z| = {:.2}",
            report.independence.len(),
            max_z(&mut report.independence.iter().map(|s| s.z))
        );
    }
    if !report.gaussianity.is_empty() {
        println!(
            "  gaussianity: {} functionals, max |z| = {:.2}",
            report.gaussianity.len(),
            max_z(&mut report.gaussianity.iter().flat_map(|g| [g.z_skew, g.z_kurt]))
        );
    }
    if !report.wiener_covariance.is_empty() {
        println!(
            "  wiener covariance: {} moments, max |z| = {:.2}",
            report.wiener_covariance.len(),
            max_z(&mut report.wiener_covariance.iter().map(|c| c.z))
        );
    }
    if !report.shell_counts.is_empty() {
        println!(
            "  shell counts: {} shells, max |z| = {:.2}",
            report.shell_counts.len(),
            max_z(&mut report.shell_counts.iter().flat_map(|c| [c.z_mean, c.z_variance]))
        );
    }
    if let Some(c) = &report.convergence {
        println!(
            "  series convergence: levels {:?}, within bound: {}",
            c.levels, c.within_bound
        );
    }
    if let Some(r) = &report.reducibility {
        let orders: Vec<String> = r
            .orders
            .iter()
            .map(|o| {
                if o.exact {
                    o.upper.to_string()
                } else {
                    format!("{}..{}", o.lower, o.upper)
                }
            })
            .collect();
        println!(
            "  reducibility: ε = {}, orders [{}], stabilized: {}",
            r.epsilon,
            orders.join(", "),
            r.stabilized
        );
    }
    if report.verdict.pass {
        println!("verdict: PASS");
    } else {
        println!("verdict: FAIL");
        for f in &report.verdict.failures {
            println!("  - {f}");
        }
    }
}
