//! Discrete energy and its exact first variation.
//!
//! Each cell contributes `w h^n F(x_i, u_i, Du)` where `i` is the cell's lower
//! corner, `w` its region weight and `Du` the matrix of forward differences
//! `(u[i + e_k] - u[i]) / h` along the cell edges leaving `i`.

use rayon::prelude::*;

use super::DensityProfile;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridField, Region};

/// Upper bound on `N * n`, the size of a cell Jacobian.
pub(crate) const MAX_JACOBIAN: usize = 64;
const CHUNK: usize = 2048;
const SCATTER_BATCH: usize = 64 * CHUNK;

/// Forward-difference Jacobian of the cell anchored at `anchor`, row-major
/// in (component, axis).
#[inline]
pub(crate) fn cell_jacobian(values: &[f64], comps: usize, strides: &[usize], anchor: usize, h: f64, out: &mut [f64]) {
    let n = strides.len();
    let base = anchor * comps;
    for (k, s) in strides.iter().enumerate() {
        let up = (anchor + s) * comps;
        for c in 0..comps {
            out[c * n + k] = (values[up + c] - values[base + c]) / h;
        }
    }
}

#[inline]
pub(crate) fn sq_norm(z: &[f64]) -> f64 {
    z.iter().map(|x| x * x).sum()
}

/// Deterministic parallel sum: fixed chunks reduced in index order.
pub(crate) fn chunked_sum<F>(len: usize, f: F) -> f64
where
    F: Fn(std::ops::Range<usize>) -> f64 + Sync,
{
    let parts: Vec<f64> =
        (0..len.div_ceil(CHUNK)).into_par_iter().map(|c| f(c * CHUNK..((c + 1) * CHUNK).min(len))).collect();
    parts.iter().sum()
}

pub(crate) fn check_compatible(density: &DensityProfile, field: &GridField, region: &Region) -> Result<()> {
    density.coefficient().check_grid(field.grid())?;
    region.check_grid(field.grid())?;
    if field.components() * field.grid().dim() > MAX_JACOBIAN {
        return Err(Error::Shape(format!("cell Jacobians larger than {MAX_JACOBIAN} entries are not supported")));
    }
    if density.depends_on_values() {
        if let Some(v) = density.frozen_point() {
            if v.len() != field.components() {
                return Err(Error::Shape("frozen point and field components differ".into()));
            }
        }
    }
    if region.cells().is_empty() {
        return Err(Error::EmptyRegion("region holds no cells".into()));
    }
    Ok(())
}

/// Exact discrete energy over the region.
pub fn total_energy(density: &DensityProfile, field: &GridField, region: &Region) -> Result<f64> {
    regularized_energy(density, field, region, 0.0)
}

/// Discrete energy with `|Du|` replaced by `rho = (|Du|^2 + mu^2)^(1/2)`,
/// shifted so that constant fields have zero energy:
/// `sum w h^n b (H(rho) - H(mu))`.
pub fn regularized_energy(density: &DensityProfile, field: &GridField, region: &Region, mu: f64) -> Result<f64> {
    check_compatible(density, field, region)?;
    energy_of_values(density, field.grid(), field.components(), field.values(), region, mu)
}

/// [`regularized_energy`] on a raw node-major value slice; compatibility of
/// the lattices is the caller's responsibility.
pub(crate) fn energy_of_values(
    density: &DensityProfile,
    grid: &Grid,
    comps: usize,
    values: &[f64],
    region: &Region,
    mu: f64,
) -> Result<f64> {
    let (n, h) = (grid.dim(), grid.spacing());
    let strides = grid.strides();
    let coef = density.coefficient().values();
    let (cells, weights) = (region.cells(), region.weights());
    let weighted = density.is_weighted();
    let mu2 = mu * mu;
    let sum = chunked_sum(cells.len(), |range| {
        let mut z = [0.0; MAX_JACOBIAN];
        let mut x = [0.0; crate::grid::MAX_DIM];
        let mut acc = 0.0;
        for idx in range {
            let i = cells[idx];
            cell_jacobian(values, comps, strides, i, h, &mut z);
            let a = coef[i];
            let rho = (sq_norm(&z[..comps * n]) + mu2).sqrt();
            let mut e = density.h_radial(a, rho) - density.h_radial(a, mu);
            if weighted {
                grid.node_point(i, &mut x[..n]);
                e *= density.modulation_at(&x[..n], &values[i * comps..(i + 1) * comps]);
            }
            acc += weights[idx] * e;
        }
        acc
    });
    let energy = sum * grid.cell_volume();
    if !energy.is_finite() {
        return Err(Error::Domain("energy is not finite; the field has non-finite values in the region".into()));
    }
    Ok(energy)
}

/// `s^t - r^t` for `s^2 - r^2 = d2`, accurate when the two are close.
#[inline]
fn power_change(r: f64, s: f64, d2: f64, t: f64) -> f64 {
    if r == 0.0 {
        return s.powf(t);
    }
    let dr = d2 / (r + s);
    r.powf(t) * (t * (dr / r).ln_1p()).exp_m1()
}

/// `energy(new) - energy(old)` for [`energy_of_values`], summed from per-cell
/// differences so that the result is accurate well below the rounding level
/// of the energies themselves.
pub(crate) fn energy_change_of_values(
    density: &DensityProfile,
    grid: &Grid,
    comps: usize,
    old: &[f64],
    new: &[f64],
    region: &Region,
    mu: f64,
) -> Result<f64> {
    let (n, h) = (grid.dim(), grid.spacing());
    let strides = grid.strides();
    let coef = density.coefficient().values();
    let (cells, weights) = (region.cells(), region.weights());
    let weighted = density.is_weighted();
    let exps = density.exponents();
    let (p, q) = (exps.p, exps.q);
    let mu2 = mu * mu;
    let len = comps * n;
    let sum = chunked_sum(cells.len(), |range| {
        let mut z = [0.0; MAX_JACOBIAN];
        let mut dz = [0.0; MAX_JACOBIAN];
        let mut delta = [0.0; MAX_JACOBIAN];
        let mut x = [0.0; crate::grid::MAX_DIM];
        let mut acc = 0.0;
        for idx in range {
            let i = cells[idx];
            cell_jacobian(old, comps, strides, i, h, &mut z);
            // Jacobian of the increment, from node-wise differences.
            let base = i * comps;
            for (k, st) in strides.iter().enumerate() {
                let up = (i + st) * comps;
                for c in 0..comps {
                    delta[c * n + k] = ((new[up + c] - old[up + c]) - (new[base + c] - old[base + c])) / h;
                }
            }
            let mut d2 = 0.0;
            for j in 0..len {
                dz[j] = z[j] + delta[j];
                d2 += delta[j] * (2.0 * z[j] + delta[j]);
            }
            let r = (sq_norm(&z[..len]) + mu2).sqrt();
            let s = (sq_norm(&dz[..len]) + mu2).sqrt();
            let a = coef[i];
            let mut dh = power_change(r, s, d2, p);
            if a != 0.0 {
                dh += a * power_change(r, s, d2, q);
            }
            let e = if weighted {
                grid.node_point(i, &mut x[..n]);
                let b_old = density.modulation_at(&x[..n], &old[base..base + comps]);
                let b_new = density.modulation_at(&x[..n], &new[base..base + comps]);
                let h_old = density.h_radial(a, r) - density.h_radial(a, mu);
                b_new * dh + (b_new - b_old) * h_old
            } else {
                dh
            };
            acc += weights[idx] * e;
        }
        acc
    });
    let change = sum * grid.cell_volume();
    if !change.is_finite() {
        return Err(Error::Domain("energy change is not finite".into()));
    }
    Ok(change)
}

/// `sum w h^n g(H(x, Du))` over the region, ignoring any modulation.
pub fn h_integral<G>(density: &DensityProfile, field: &GridField, region: &Region, g: G) -> Result<f64>
where
    G: Fn(f64) -> f64 + Sync,
{
    check_compatible(density, field, region)?;
    let grid = field.grid();
    let (comps, n, h) = (field.components(), grid.dim(), grid.spacing());
    let strides = grid.strides();
    let values = field.values();
    let coef = density.coefficient().values();
    let (cells, weights) = (region.cells(), region.weights());
    let sum = chunked_sum(cells.len(), |range| {
        let mut z = [0.0; MAX_JACOBIAN];
        let mut acc = 0.0;
        for idx in range {
            let i = cells[idx];
            cell_jacobian(values, comps, strides, i, h, &mut z);
            acc += weights[idx] * g(density.h_radial(coef[i], sq_norm(&z[..comps * n]).sqrt()));
        }
        acc
    });
    let total = sum * grid.cell_volume();
    if !total.is_finite() {
        return Err(Error::Domain("integral is not finite; the field has non-finite values in the region".into()));
    }
    Ok(total)
}

/// `H(x, Du)` on every cell of the region, in the region's cell order.
pub fn h_cell_values(density: &DensityProfile, field: &GridField, region: &Region) -> Result<Vec<f64>> {
    check_compatible(density, field, region)?;
    let grid = field.grid();
    let (comps, n, h) = (field.components(), grid.dim(), grid.spacing());
    let strides = grid.strides();
    let values = field.values();
    let coef = density.coefficient().values();
    let mut z = [0.0; MAX_JACOBIAN];
    let out: Vec<f64> = region
        .cells()
        .iter()
        .map(|&i| {
            cell_jacobian(values, comps, strides, i, h, &mut z);
            density.h_radial(coef[i], sq_norm(&z[..comps * n]).sqrt())
        })
        .collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("the field has non-finite values in the region".into()));
    }
    Ok(out)
}

/// `int_region H(x, Du)` with the modulation ignored.
pub fn h_energy(density: &DensityProfile, field: &GridField, region: &Region) -> Result<f64> {
    h_integral(density, field, region, |v| v)
}

/// Gradient of [`regularized_energy`] with respect to every node value,
/// returned as an unconstrained field of the same shape.
pub fn energy_gradient(density: &DensityProfile, field: &GridField, region: &Region, mu: f64) -> Result<GridField> {
    let g = gradient_values(density, field, region, mu)?;
    GridField::new(field.grid().clone(), field.components(), g)
}

pub(crate) fn gradient_values(
    density: &DensityProfile,
    field: &GridField,
    region: &Region,
    mu: f64,
) -> Result<Vec<f64>> {
    check_compatible(density, field, region)?;
    let mut grad = vec![0.0; field.values().len()];
    accumulate_gradient(density, field.grid(), field.components(), field.values(), region, mu, &mut grad)?;
    Ok(grad)
}

/// Adds the energy gradient of `values` (a node-major field) into `grad`.
pub(crate) fn accumulate_gradient(
    density: &DensityProfile,
    grid: &Grid,
    comps: usize,
    values: &[f64],
    region: &Region,
    mu: f64,
    grad: &mut [f64],
) -> Result<()> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::Options(format!("regularizer mu = {mu} must be finite and >= 0")));
    }
    let (n, h) = (grid.dim(), grid.spacing());
    let strides = grid.strides();
    let coef = density.coefficient().values();
    let (cells, weights) = (region.cells(), region.weights());
    let weighted = density.is_weighted();
    let value_dependent = density.depends_on_values();
    let block = comps * n + if value_dependent { comps } else { 0 };
    let vol = grid.cell_volume();
    let mu2 = mu * mu;

    for batch_start in (0..cells.len()).step_by(SCATTER_BATCH) {
        let batch_end = (batch_start + SCATTER_BATCH).min(cells.len());
        let parts: Vec<Vec<f64>> = (batch_start..batch_end)
            .step_by(CHUNK)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|start| -> Result<Vec<f64>> {
                let end = (start + CHUNK).min(batch_end);
                let mut out = vec![0.0; (end - start) * block];
                let mut z = [0.0; MAX_JACOBIAN];
                let mut x = [0.0; crate::grid::MAX_DIM];
                let mut db = [0.0; MAX_JACOBIAN];
                for (slot, idx) in (start..end).enumerate() {
                    let i = cells[idx];
                    cell_jacobian(values, comps, strides, i, h, &mut z);
                    let a = coef[i];
                    let rho = (sq_norm(&z[..comps * n]) + mu2).sqrt();
                    let slope = density.h_slope_over_t(a, rho);
                    if !slope.is_finite() {
                        return Err(Error::Singularity(format!(
                            "vanishing cell gradient at node {i} with p or q below 2; use mu > 0"
                        )));
                    }
                    let u_i = &values[i * comps..(i + 1) * comps];
                    let b = if weighted {
                        grid.node_point(i, &mut x[..n]);
                        density.modulation_at(&x[..n], u_i)
                    } else {
                        1.0
                    };
                    let scale = weights[idx] * vol * b * slope;
                    let o = &mut out[slot * block..(slot + 1) * block];
                    for j in 0..comps * n {
                        o[j] = scale * z[j] / h;
                    }
                    if value_dependent {
                        density.modulation_grad(&x[..n], u_i, &mut db[..comps]);
                        let e = density.h_radial(a, rho) - density.h_radial(a, mu);
                        for c in 0..comps {
                            o[comps * n + c] = weights[idx] * vol * db[c] * e;
                        }
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut idx = batch_start;
        for part in parts {
            for o in part.chunks(block) {
                let i = cells[idx];
                for c in 0..comps {
                    let mut outflow = 0.0;
                    for (k, s) in strides.iter().enumerate() {
                        let flux = o[c * n + k];
                        grad[(i + s) * comps + c] += flux;
                        outflow += flux;
                    }
                    grad[i * comps + c] -= outflow;
                    if value_dependent {
                        grad[i * comps + c] += o[comps * n + c];
                    }
                }
                idx += 1;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::Exponents;
    use crate::grid::{CoefficientField, Grid};

    fn quad_density(grid: &Grid) -> DensityProfile {
        DensityProfile::pure(Exponents::new(2.0, 2.4, 1.0).unwrap(), CoefficientField::zero(grid)).unwrap()
    }

    #[test]
    fn energy_change_matches_difference_of_energies() {
        let g = Grid::cube(2, 0.0, 1.0, 9).unwrap();
        let a = CoefficientField::from_fn(&g, 1.0, |x| x[0] * 0.8).unwrap();
        let d = DensityProfile::pure(Exponents::growth(2.3, 3.1, 1.0).unwrap(), a).unwrap();
        let region = Region::full(&g);
        let old: Vec<f64> = (0..g.node_count() * 2).map(|i| ((i * 37 % 11) as f64 * 0.3).sin()).collect();
        let new: Vec<f64> = old.iter().enumerate().map(|(i, v)| v + 1e-3 * ((i % 5) as f64 - 2.0)).collect();
        for mu in [0.0, 1e-3] {
            let e0 = energy_of_values(&d, &g, 2, &old, &region, mu).unwrap();
            let e1 = energy_of_values(&d, &g, 2, &new, &region, mu).unwrap();
            let de = energy_change_of_values(&d, &g, 2, &old, &new, &region, mu).unwrap();
            assert!((de - (e1 - e0)).abs() < 1e-10 * e0, "{de} vs {}", e1 - e0);
        }
        assert_eq!(energy_change_of_values(&d, &g, 2, &old, &old, &region, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn constant_field_has_zero_energy_and_gradient() {
        let g = Grid::cube(2, 0.0, 1.0, 6).unwrap();
        let d = quad_density(&g);
        let u = GridField::constant(g.clone(), &[0.3, -0.2]).unwrap();
        let r = Region::full(&g);
        assert_eq!(total_energy(&d, &u, &r).unwrap(), 0.0);
        assert!(gradient_values(&d, &u, &r, 1e-4).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn affine_field_energy_is_integrand_times_area() {
        let g = Grid::cube(2, 0.0, 1.0, 9).unwrap();
        let a0 = 0.5;
        let d =
            DensityProfile::pure(Exponents::new(2.0, 2.8, 1.0).unwrap(), CoefficientField::constant(&g, a0).unwrap())
                .unwrap();
        let u = GridField::from_fn(g.clone(), 1, |x, v| v[0] = 3.0 * x[0] + 4.0 * x[1]).unwrap();
        let e = total_energy(&d, &u, &Region::full(&g)).unwrap();
        let m: f64 = 5.0;
        assert!((e - (m.powi(2) + a0 * m.powf(2.8))).abs() < 1e-10);
    }

    #[test]
    fn quadratic_gradient_is_the_five_point_stencil() {
        // On a 3x3 patch with a = 0 and p = 2 the gradient at the center node is
        // -2 h^2 times the five-point Laplacian, computed here by hand.
        let g = Grid::cube(2, 0.0, 1.0, 3).unwrap();
        let h: f64 = 0.5;
        let vals = vec![0.1, -0.4, 0.7, 0.2, 0.9, -0.3, 0.5, 0.0, 0.6];
        let u = GridField::new(g.clone(), 1, vals.clone()).unwrap();
        let grad = gradient_values(&quad_density(&g), &u, &Region::full(&g), 0.0).unwrap();
        let lap = (vals[1] + vals[7] + vals[3] + vals[5] - 4.0 * vals[4]) / (h * h);
        assert!((grad[4] - (-2.0 * h * h * lap)).abs() < 1e-13);
    }

    #[test]
    fn singular_gradient_without_regularization() {
        let g = Grid::cube(2, 0.0, 1.0, 4).unwrap();
        let d = DensityProfile::pure(Exponents::new(1.5, 1.8, 1.0).unwrap(), CoefficientField::zero(&g)).unwrap();
        let u = GridField::constant(g.clone(), &[1.0]).unwrap();
        assert!(matches!(gradient_values(&d, &u, &Region::full(&g), 0.0), Err(Error::Singularity(_))));
        assert!(gradient_values(&d, &u, &Region::full(&g), 1e-4).is_ok());
    }

    #[test]
    fn mismatched_lattices_are_rejected() {
        let g = Grid::cube(2, 0.0, 1.0, 4).unwrap();
        let g2 = Grid::cube(2, 0.0, 1.0, 5).unwrap();
        let u = GridField::constant(g2, &[1.0]).unwrap();
        assert!(matches!(total_energy(&quad_density(&g), &u, &Region::full(&g)), Err(Error::Shape(_))));
    }
}
