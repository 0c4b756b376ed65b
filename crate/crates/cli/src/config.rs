//! Experiment configuration: the TOML schema, validation into core model
//! objects, and the canonical hash that ties artifacts to the exact
//! configuration that produced them.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use levyito::linalg::SquareMatrix;
use levyito::measure::{Atom, AtomicMeasure, RadialShellMeasure};
use levyito::scalar::Scalar;
use levyito::streams::{stream, StreamKind};
use levyito::{BanachDiskF64, CharacteristicsF64, LevyMeasureF64, SpaceModelF64};

use crate::CliError;

/// Parsed experiment file. Unknown keys are rejected everywhere so a typo
/// cannot silently fall back to a default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub space: SpaceSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disk: Option<DiskSection>,
    pub characteristics: CharSection,
    pub time: TimeSection,
    pub simulation: SimSection,
    #[serde(default)]
    pub verification: VerifySection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    pub dim: usize,
    /// Weights of the coordinate functionals in the weak metric; geometric
    /// `2^-(i+1)` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskSection {
    /// Coordinate radii of the gauge body K; the unit cube when omitted.
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharSection {
    pub gamma: Vec<f64>,
    pub q: QSection,
    pub levy: LevySection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QSection {
    pub rows: Vec<Vec<f64>>,
}

/// Exactly one of the two measure families.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atomic: Option<AtomicSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radial_shell: Option<RadialSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomicSection {
    pub atoms: Vec<AtomEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomEntry {
    pub point: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialSection {
    pub mass_coeff: f64,
    pub decay: f64,
    pub directions: Vec<Vec<f64>>,
    pub tail_mass: f64,
    pub tail_outer_gauge: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub horizon: f64,
    pub grid_steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub replicas: usize,
    /// Root seed. Every stream in the run is derived from it; there is no
    /// implicit entropy anywhere, which is what makes reruns byte-identical.
    pub seed: u64,
    pub shell_cutoff: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Either a count (functionals are then drawn deterministically from the
    /// seed) or an explicit list of vectors.
    pub functionals: FunctionalsSpec,
    /// |z| budget for individual statistics.
    pub tolerance_z: f64,
    /// Mass defect for the reducibility order search.
    pub epsilon: f64,
    /// Truncation levels for the series-convergence and reducibility checks;
    /// empty disables those sections.
    pub truncation_levels: Vec<u32>,
    /// Times at which marginals are compared against the analytic
    /// characteristic function; must be grid knots. Defaults to the horizon.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cf_times: Option<Vec<f64>>,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            functionals: FunctionalsSpec::Count(10),
            tolerance_z: 4.0,
            epsilon: 0.01,
            truncation_levels: Vec::new(),
            cf_times: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionalsSpec {
    Count(usize),
    List(Vec<Vec<f64>>),
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Command-line overrides become part of the effective configuration —
    /// they are applied before hashing, so a run with `--seed 7` and a run
    /// whose file says `seed = 7` produce identical artifacts and hashes.
    pub fn apply_overrides(&mut self, seed: Option<u64>, replicas: Option<usize>) {
        if let Some(s) = seed {
            self.simulation.seed = s;
        }
        if let Some(r) = replicas {
            self.simulation.replicas = r;
        }
    }

    /// SHA-256 over the canonical JSON form of the effective configuration.
    /// Struct field order fixes the byte layout, so equal configurations
    /// hash equally regardless of formatting or key order in the TOML.
    pub fn canonical_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serialization cannot fail");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Validate and assemble the core model objects.
    pub fn build(&self) -> Result<Experiment, CliError> {
        let dim = self.space.dim;
        let space = match &self.space.weights {
            Some(w) => SpaceModelF64::with_weights(dim, w.clone()),
            None => SpaceModelF64::new(dim),
        }
        .map_err(config_err)?;
        if space.dim() != dim {
            return Err(CliError::Config(format!(
                "space.weights has {} entries but space.dim is {dim}",
                space.dim()
            )));
        }
        let disk = match &self.disk {
            Some(d) => BanachDiskF64::new(d.radii.clone()),
            None => BanachDiskF64::unit(dim),
        }
        .map_err(config_err)?;

        let nu = match (&self.characteristics.levy.atomic, &self.characteristics.levy.radial_shell)
        {
            (Some(a), None) => LevyMeasureF64::Atomic(
                AtomicMeasure::new(
                    dim,
                    a.atoms
                        .iter()
                        .map(|e| Atom { point: e.point.clone(), mass: e.mass })
                        .collect(),
                )
                .map_err(config_err)?,
            ),
            (None, Some(r)) => LevyMeasureF64::RadialShell(
                RadialShellMeasure::new(
                    r.mass_coeff,
                    r.decay,
                    r.directions.clone(),
                    r.tail_mass,
                    r.tail_outer_gauge,
                )
                .map_err(config_err)?,
            ),
            _ => {
                return Err(CliError::Config(
                    "characteristics.levy needs exactly one of `atomic` or `radial_shell`".into(),
                ))
            }
        };
        let q = SquareMatrix::from_rows(&self.characteristics.q.rows).map_err(config_err)?;
        let chars = CharacteristicsF64::new(
            self.characteristics.gamma.clone(),
            q,
            nu,
            disk,
        )
        .map_err(config_err)?;

        if !(self.time.horizon > 0.0) || !self.time.horizon.is_finite() {
            return Err(CliError::Config("time.horizon must be positive and finite".into()));
        }
        if self.time.grid_steps < 1 {
            return Err(CliError::Config("time.grid_steps must be ≥ 1".into()));
        }
        let grid: Vec<f64> = (0..=self.time.grid_steps)
            .map(|k| self.time.horizon * k as f64 / self.time.grid_steps as f64)
            .collect();

        if self.simulation.replicas < 2 {
            return Err(CliError::Config("simulation.replicas must be ≥ 2".into()));
        }
        if self.simulation.shell_cutoff < 1 {
            return Err(CliError::Config("simulation.shell_cutoff must be ≥ 1".into()));
        }
        let v = &self.verification;
        if let Some(&deepest) = v.truncation_levels.iter().max() {
            if deepest > self.simulation.shell_cutoff {
                return Err(CliError::Config(format!(
                    "verification.truncation_levels reach {deepest} but only shells up to \
                     {} are simulated",
                    self.simulation.shell_cutoff
                )));
            }
        }
        if !(v.tolerance_z > 0.0) {
            return Err(CliError::Config("verification.tolerance_z must be positive".into()));
        }
        if !(v.epsilon > 0.0 && v.epsilon < 1.0) {
            return Err(CliError::Config("verification.epsilon must lie in (0, 1)".into()));
        }

        let functionals = match &v.functionals {
            FunctionalsSpec::List(list) => {
                for a in list {
                    if a.len() != dim {
                        return Err(CliError::Config(format!(
                            "functional {a:?} does not have dimension {dim}"
                        )));
                    }
                }
                if list.is_empty() {
                    return Err(CliError::Config("verification.functionals is empty".into()));
                }
                list.clone()
            }
            FunctionalsSpec::Count(n) => {
                if *n == 0 {
                    return Err(CliError::Config("verification.functionals is zero".into()));
                }
                generated_functionals(self.simulation.seed, *n, dim)
            }
        };

        let cf_times = match &v.cf_times {
            Some(ts) => {
                for &t in ts {
                    let on_grid = grid.iter().any(|&g| g == t);
                    if !on_grid {
                        return Err(CliError::Config(format!(
                            "cf time {t} is not a grid knot; marginals are only sampled there"
                        )));
                    }
                }
                ts.clone()
            }
            None => vec![self.time.horizon],
        };

        Ok(Experiment {
            chars,
            grid,
            horizon: self.time.horizon,
            replicas: self.simulation.replicas,
            seed: self.simulation.seed,
            shell_cutoff: self.simulation.shell_cutoff,
            functionals,
            cf_times,
            tolerance_z: v.tolerance_z,
            epsilon: v.epsilon,
            truncation_levels: v.truncation_levels.clone(),
        })
    }
}

/// Deterministic functional set: unit vectors drawn from the seed's own
/// stream family, one substream per functional.
fn generated_functionals(seed: u64, count: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| {
            let mut rng = stream(seed, i as u32, StreamKind::Functionals, 0);
            let v: Vec<f64> = (0..dim).map(|_| f64::standard_normal(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            // a zero draw has probability zero; fall back to a basis vector
            if norm > 0.0 {
                v.into_iter().map(|x| x / norm).collect()
            } else {
                (0..dim).map(|j| if j == i % dim { 1.0 } else { 0.0 }).collect()
            }
        })
        .collect()
}

fn config_err(e: levyito::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Everything a command needs, validated and ready.
pub struct Experiment {
    pub chars: CharacteristicsF64,
    pub grid: Vec<f64>,
    pub horizon: f64,
    pub replicas: usize,
    pub seed: u64,
    pub shell_cutoff: u32,
    pub functionals: Vec<Vec<f64>>,
    pub cf_times: Vec<f64>,
    pub tolerance_z: f64,
    pub epsilon: f64,
    pub truncation_levels: Vec<u32>,
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const EXAMPLE: &str = r#"
[space]
dim = 2

[characteristics]
gamma = [0.4, -0.2]

[characteristics.q]
rows = [[0.5, 0.3], [0.3, 0.2]]

[characteristics.levy.radial_shell]
mass_coeff = 0.9
decay = 1.0
directions = [[1.0, 0.0], [0.0, 1.0]]
tail_mass = 0.6
tail_outer_gauge = 2.5

[time]
horizon = 1.0
grid_steps = 8

[simulation]
replicas = 50
seed = 42
shell_cutoff = 8

[verification]
functionals = 4
truncation_levels = [2, 4, 8]
cf_times = [0.5, 1.0]
"#;

    #[test]
    fn example_config_builds() {
        let cfg: ExperimentConfig = toml::from_str(EXAMPLE).unwrap();
        let exp = cfg.build().unwrap();
        assert_eq!(exp.chars.dim(), 2);
        assert_eq!(exp.grid.len(), 9);
        assert_eq!(exp.functionals.len(), 4);
        for a in &exp.functionals {
            let n: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = EXAMPLE.replace("grid_steps = 8", "grid_steps = 8\nstep_size = 0.1");
        assert!(toml::from_str::<ExperimentConfig>(&bad).is_err());
    }

    #[test]
    fn hash_ignores_formatting_but_sees_overrides() {
        let a: ExperimentConfig = toml::from_str(EXAMPLE).unwrap();
        let reformatted = EXAMPLE.replace("seed = 42", "seed      =   42");
        let b: ExperimentConfig = toml::from_str(&reformatted).unwrap();
        assert_eq!(a.canonical_hash(), b.canonical_hash());

        let mut c = a.clone();
        c.apply_overrides(Some(43), None);
        assert_ne!(a.canonical_hash(), c.canonical_hash());
        // an override equal to the file value is a no-op
        let mut d = a.clone();
        d.apply_overrides(Some(42), None);
        assert_eq!(a.canonical_hash(), d.canonical_hash());
    }

    #[test]
    fn off_grid_cf_times_are_rejected() {
        let bad = EXAMPLE.replace("cf_times = [0.5, 1.0]", "cf_times = [0.3]");
        let cfg: ExperimentConfig = toml::from_str(&bad).unwrap();
        assert!(matches!(cfg.build(), Err(CliError::Config(_))));
    }

    #[test]
    fn levy_family_must_be_unique() {
        let two = EXAMPLE.replace(
            "[time]",
            "[[characteristics.levy.atomic.atoms]]\npoint = [0.5, 0.0]\nmass = 1.0\n\n[time]",
        );
        let cfg: ExperimentConfig = toml::from_str(&two).unwrap();
        assert!(matches!(cfg.build(), Err(CliError::Config(_))));
    }

    #[test]
    fn truncation_beyond_cutoff_is_rejected() {
        let bad = EXAMPLE.replace("truncation_levels = [2, 4, 8]", "truncation_levels = [2, 16]");
        let cfg: ExperimentConfig = toml::from_str(&bad).unwrap();
        assert!(matches!(cfg.build(), Err(CliError::Config(_))));
    }
}
