//! The experiment description: one JSON document per run.

use std::path::{Path, PathBuf};

use dphase::energy::Exponents;
use dphase::regularity::RegularityOptions;
use dphase::solver::SolveOptions;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub exponents: ExponentConfig,
    #[serde(default)]
    pub coefficient: CoefficientRecipe,
    pub initial_map: MapRecipe,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub analyzer: AnalyzerConfig,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

/// Lattice box `[lower, upper]` in `R^dim` with `nodes` nodes on the first
/// axis, carrying maps into the sphere of `R^target_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub target_dim: usize,
    pub nodes: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentConfig {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    /// Integrability gain of the measure stage; probed when absent.
    #[serde(default)]
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientRecipe {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `scale * dist(x, {normal . x = offset})^alpha`.
    DistToHyperplane {
        normal: Vec<f64>,
        #[serde(default)]
        offset: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `scale * dist(x, B(center, radius))^alpha`.
    DistToBall {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Two materials in a `cells^n` checkerboard with tanh-smoothed
    /// interfaces of relative width `smoothing`.
    Checkerboard {
        cells: usize,
        low: f64,
        high: f64,
        smoothing: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapRecipe {
    /// Normalized to unit length.
    Constant { value: Vec<f64> },
    /// `(x - center) / |x - center|`; needs `target_dim == dim`.
    Hedgehog { center: Vec<f64> },
    /// Independent uniform points of the sphere, drawn from the run seed.
    RandomSphere,
    /// A field written by an earlier run; relative paths resolve against the
    /// directory of the config file.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzerConfig {
    pub radii: Vec<f64>,
    pub probes_per_axis: usize,
    /// Exponent of the phase threshold used by the census.
    pub gamma: f64,
    pub options: RegularityOptions,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        AnalyzerConfig { radii: vec![0.3, 0.2], probes_per_axis: 7, gamma: 0.75, options: RegularityOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    pub kappas: Vec<f64>,
    /// Random coverings per kappa of the cost comparison; 0 skips it.
    pub comparison_coverings: usize,
    /// Lattice nodes per axis of the capacity solves; 0 skips them.
    pub capacity_mesh: usize,
    pub capacity_solver: SolveOptions,
    /// Sample budget of the `probe-axioms` command.
    pub axiom_budget: usize,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            kappas: vec![0.2, 0.1, 0.05, 0.025],
            comparison_coverings: 0,
            capacity_mesh: 17,
            capacity_solver: SolveOptions { max_iters: 500, grad_tol: 1e-6, ..SolveOptions::default() },
            axiom_budget: 400,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// A validated config together with the directory its relative paths
/// resolve against.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub exponents: Exponents,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Hex SHA-256 of the canonical serialization, ignoring the output
    /// directory so that relocated runs share a hash.
    pub fn hash(&self) -> String {
        let mut canonical = self.config.clone();
        canonical.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("configs serialize");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn load(path: &Path) -> CliResult<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse(&text, path, base_dir)
}

pub fn parse(text: &str, origin: &Path, base_dir: PathBuf) -> CliResult<LoadedConfig> {
    let config: ExperimentConfig =
        serde_json::from_str(text).map_err(|source| CliError::Parse { path: origin.to_path_buf(), source })?;
    let exponents = config.validate()?;
    Ok(LoadedConfig { config, exponents, base_dir })
}

fn check(ok: bool, field: &str, message: impl FnOnce() -> String) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(field, message()))
    }
}

fn finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

impl ExperimentConfig {
    /// Checks every invariant that does not need the lattice built.
    pub fn validate(&self) -> CliResult<Exponents> {
        let g = &self.grid;
        let n = g.dim;
        check((1..=dphase::grid::MAX_DIM).contains(&n), "grid.dim", || {
            format!("{n} is not in 1..={}", dphase::grid::MAX_DIM)
        })?;
        check(g.target_dim >= 2, "grid.target_dim", || "the target sphere needs target_dim >= 2".into())?;
        check(g.nodes >= 3, "grid.nodes", || "at least three nodes per axis are required".into())?;
        check(g.lower.len() == n && finite(&g.lower), "grid.lower", || format!("expected {n} finite coordinates"))?;
        check(g.upper.len() == n && finite(&g.upper), "grid.upper", || format!("expected {n} finite coordinates"))?;
        check(g.lower.iter().zip(&g.upper).all(|(a, b)| b > a), "grid.upper", || {
            "every upper coordinate must exceed the lower one".into()
        })?;

        let e = &self.exponents;
        let exponents =
            Exponents::new(e.p, e.q, e.alpha).map_err(|err| CliError::config("exponents", err.to_string()))?;
        if let Some(delta) = e.delta {
            check(delta >= 0.0 && delta.is_finite(), "exponents.delta", || format!("{delta} must be finite and >= 0"))?;
        }

        self.validate_coefficient()?;
        self.validate_map()?;
        self.solver.validate().map_err(|err| CliError::config("solver", err.to_string()))?;

        let a = &self.analyzer;
        check(!a.radii.is_empty() && a.radii.iter().all(|r| *r > 0.0 && r.is_finite()), "analyzer.radii", || {
            "radii must be a non-empty list of positive numbers".into()
        })?;
        check(a.probes_per_axis >= 1, "analyzer.probes_per_axis", || "must be at least 1".into())?;
        check((0.5..1.0).contains(&a.gamma), "analyzer.gamma", || format!("{} must lie in [0.5, 1)", a.gamma))?;
        a.options.validate().map_err(|err| CliError::config("analyzer.options", err.to_string()))?;

        let m = &self.measure;
        check(!m.kappas.is_empty() && m.kappas.iter().all(|k| *k > 0.0 && k.is_finite()), "measure.kappas", || {
            "kappas must be a non-empty list of positive numbers".into()
        })?;
        check(m.capacity_mesh == 0 || m.capacity_mesh >= 3, "measure.capacity_mesh", || {
            "use 0 to skip the capacity solves or at least 3 nodes".into()
        })?;
        m.capacity_solver.validate().map_err(|err| CliError::config("measure.capacity_solver", err.to_string()))?;
        check(m.axiom_budget >= 1, "measure.axiom_budget", || "must be at least 1".into())?;
        Ok(exponents)
    }

    fn validate_coefficient(&self) -> CliResult<()> {
        let n = self.grid.dim;
        match &self.coefficient {
            CoefficientRecipe::Zero => Ok(()),
            CoefficientRecipe::Constant { value } => {
                check(*value >= 0.0 && value.is_finite(), "coefficient.value", || format!("{value} must be >= 0"))
            }
            CoefficientRecipe::DistToHyperplane { normal, offset, scale } => {
                check(normal.len() == n && finite(normal), "coefficient.normal", || {
                    format!("expected {n} finite coordinates")
                })?;
                check(normal.iter().any(|v| *v != 0.0), "coefficient.normal", || "must be non-zero".into())?;
                check(offset.is_finite(), "coefficient.offset", || "must be finite".into())?;
                check(*scale >= 0.0 && scale.is_finite(), "coefficient.scale", || "must be finite and >= 0".into())
            }
            CoefficientRecipe::DistToBall { center, radius, scale } => {
                check(center.len() == n && finite(center), "coefficient.center", || {
                    format!("expected {n} finite coordinates")
                })?;
                check(*radius >= 0.0 && radius.is_finite(), "coefficient.radius", || "must be finite and >= 0".into())?;
                check(*scale >= 0.0 && scale.is_finite(), "coefficient.scale", || "must be finite and >= 0".into())
            }
            CoefficientRecipe::Checkerboard { cells, low, high, smoothing } => {
                check(*cells >= 1, "coefficient.cells", || "must be at least 1".into())?;
                check(*low >= 0.0 && low.is_finite(), "coefficient.low", || "must be finite and >= 0".into())?;
                check(high >= low && high.is_finite(), "coefficient.high", || "must be finite and >= low".into())?;
                check(*smoothing > 0.0 && smoothing.is_finite(), "coefficient.smoothing", || "must be positive".into())
            }
        }
    }

    fn validate_map(&self) -> CliResult<()> {
        let (n, big_n) = (self.grid.dim, self.grid.target_dim);
        match &self.initial_map {
            MapRecipe::Constant { value } => {
                check(value.len() == big_n && finite(value), "initial_map.value", || {
                    format!("expected {big_n} finite components")
                })?;
                check(value.iter().any(|v| *v != 0.0), "initial_map.value", || "must be non-zero".into())
            }
            MapRecipe::Hedgehog { center } => {
                check(big_n == n, "initial_map", || {
                    format!("the hedgehog needs target_dim = dim, got {big_n} and {n}")
                })?;
                check(center.len() == n && finite(center), "initial_map.center", || {
                    format!("expected {n} finite coordinates")
                })
            }
            MapRecipe::RandomSphere => Ok(()),
            MapRecipe::File { path } => {
                check(!path.as_os_str().is_empty(), "initial_map.path", || "must not be empty".into())
            }
        }
    }
}
