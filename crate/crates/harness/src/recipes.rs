//! Turns the recipes of a config into lattices, coefficients and fields.

use std::path::Path;

use dphase::energy::DensityProfile;
use dphase::grid::{CoefficientField, Grid, GridField};
use dphase::{fields, io};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{CoefficientRecipe, LoadedConfig, MapRecipe};
use crate::error::{CliError, CliResult, StageContext};

pub fn build_grid(loaded: &LoadedConfig) -> CliResult<Grid> {
    let g = &loaded.config.grid;
    Grid::from_extents(&g.lower, &g.upper, g.nodes).map_err(|e| CliError::config("grid", e.to_string()))
}

fn unit(v: &[f64]) -> Vec<f64> {
    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / r).collect()
}

pub fn build_coefficient(loaded: &LoadedConfig, grid: &Grid) -> CliResult<CoefficientField> {
    let alpha = loaded.exponents.alpha;
    let field = match loaded.config.coefficient.clone() {
        CoefficientRecipe::Zero => Ok(CoefficientField::zero(grid)),
        CoefficientRecipe::Constant { value } => CoefficientField::constant(grid, value),
        CoefficientRecipe::DistToHyperplane { normal, offset, scale } => {
            // The distance is 1-Lipschitz, and t -> t^alpha is alpha-Holder
            // with constant 1, so the seminorm is exactly `scale`.
            let norm = normal.iter().map(|x| x * x).sum::<f64>().sqrt();
            let normal = unit(&normal);
            let offset = offset / norm;
            CoefficientField::from_fn_with_seminorm(grid, alpha, scale, move |x| {
                let d = (x.iter().zip(&normal).map(|(a, b)| a * b).sum::<f64>() - offset).abs();
                scale * d.powf(alpha)
            })
        }
        CoefficientRecipe::DistToBall { center, radius, scale } => {
            CoefficientField::from_fn_with_seminorm(grid, alpha, scale, move |x| {
                let r = x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                scale * (r - radius).max(0.0).powf(alpha)
            })
        }
        CoefficientRecipe::Checkerboard { cells, low, high, smoothing } => {
            let lower = grid.lower().to_vec();
            let extent: Vec<f64> = grid.upper().iter().zip(&lower).map(|(u, l)| u - l).collect();
            CoefficientField::from_fn(grid, alpha, move |x| {
                let sign: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(k, xk)| {
                        let phase = std::f64::consts::PI * cells as f64 * (xk - lower[k]) / extent[k];
                        (phase.sin() / smoothing).tanh()
                    })
                    .product();
                low + (high - low) * 0.5 * (1.0 + sign)
            })
        }
    };
    field.map_err(|e| CliError::config("coefficient", e.to_string()))
}

pub fn build_density(loaded: &LoadedConfig, grid: &Grid) -> CliResult<DensityProfile> {
    let coefficient = build_coefficient(loaded, grid)?;
    DensityProfile::pure(loaded.exponents, coefficient).stage("setup")
}

/// Uniform point of the sphere by rejection from the cube.
fn sphere_point(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    loop {
        out.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        let r2: f64 = out.iter().map(|v| v * v).sum();
        if r2 > 1e-4 && r2 <= 1.0 {
            let r = r2.sqrt();
            out.iter_mut().for_each(|v| *v /= r);
            return;
        }
    }
}

pub fn build_initial_map(loaded: &LoadedConfig, grid: &Grid) -> CliResult<GridField> {
    let target_dim = loaded.config.grid.target_dim;
    match &loaded.config.initial_map {
        MapRecipe::Constant { value } => {
            GridField::constant(grid.clone(), &unit(value)).and_then(|f| f.into_constrained(1e-12)).stage("setup")
        }
        MapRecipe::Hedgehog { center } => fields::hedgehog(grid, center).stage("setup"),
        MapRecipe::RandomSphere => {
            let mut rng = ChaCha8Rng::seed_from_u64(loaded.config.seed);
            GridField::from_fn(grid.clone(), target_dim, |_, out| sphere_point(&mut rng, out))
                .and_then(|f| f.into_constrained(1e-12))
                .stage("setup")
        }
        MapRecipe::File { path } => {
            let path = loaded.resolve(path);
            let field = read_field(&path)?;
            check_field(&field, grid, target_dim, &path, "setup")?;
            Ok(field)
        }
    }
}

/// Rejects a field whose lattice or component count differs from the config.
pub(crate) fn check_field(
    field: &GridField,
    grid: &Grid,
    target_dim: usize,
    path: &Path,
    stage: &'static str,
) -> CliResult<()> {
    if same_lattice(field.grid(), grid) && field.components() == target_dim {
        return Ok(());
    }
    Err(CliError::Stage {
        stage,
        source: dphase::Error::Shape(format!(
            "{} does not match the configured lattice and target dimension",
            path.display()
        )),
    })
}

/// Equal node counts, and corners and spacing equal up to the rounding
/// of a decimal round trip.
fn same_lattice(a: &Grid, b: &Grid) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0);
    a.dims() == b.dims()
        && close(a.spacing(), b.spacing())
        && a.lower().iter().zip(b.lower()).all(|(x, y)| close(*x, *y))
}

/// Reads a field sidecar, reporting a missing file as an I/O error on that path.
pub fn read_field(path: &Path) -> CliResult<GridField> {
    match io::read_field(path) {
        Err(dphase::Error::Io(e)) => Err(CliError::io(path, e)),
        other => other.stage("read"),
    }
}
