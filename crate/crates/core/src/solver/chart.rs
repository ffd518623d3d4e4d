//! Stereographic coordinates on the sphere, centered at the pole `-e_1`.

use crate::energy::{cell_jacobian, check_compatible, chunked_sum, sq_norm, DensityProfile, MAX_JACOBIAN};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridField, Region, DEFAULT_CONSTRAINT_TOL, MAX_DIM};

/// `S(y) = ((|y|^2 - 1) / (|y|^2 + 1), 2 y / (|y|^2 + 1))`, so `S(0) = -e_1`.
pub fn stereographic_forward(y: &[f64]) -> Vec<f64> {
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let d = 1.0 + yy;
    let mut out = Vec::with_capacity(y.len() + 1);
    out.push((yy - 1.0) / d);
    out.extend(y.iter().map(|v| 2.0 * v / d));
    out
}

/// `S^{-1}(v) = (v^2, ..., v^N) / (1 - v^1)`, defined away from the pole `e_1`.
pub fn stereographic_inverse(v: &[f64]) -> Result<Vec<f64>> {
    if v.len() < 2 {
        return Err(Error::Chart("stereographic coordinates need at least two components".into()));
    }
    if !(v[0] < 1.0 - 1e-9) {
        return Err(Error::Chart(format!("first component {} is at the chart pole", v[0])));
    }
    let d = 1.0 - v[0];
    Ok(v[1..].iter().map(|x| x / d).collect())
}

/// The conformal factor of `S`: `|DS(y) z| = 2 / (1 + |y|^2) |z|`.
pub fn chart_gradient_factor(y: &[f64]) -> f64 {
    2.0 / (1.0 + y.iter().map(|v| v * v).sum::<f64>())
}

/// `DS(y)` as an `N x (N - 1)` row-major matrix.
pub fn chart_jacobian(y: &[f64]) -> Vec<f64> {
    let m = y.len();
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let d = 1.0 + yy;
    let mut jac = vec![0.0; (m + 1) * m];
    for j in 0..m {
        jac[j] = 4.0 * y[j] / (d * d);
        for i in 0..m {
            let delta = if i == j { 2.0 / d } else { 0.0 };
            jac[(i + 1) * m + j] = delta - 4.0 * y[i] * y[j] / (d * d);
        }
    }
    jac
}

/// Chart coordinates of a sphere-valued field, node by node.
pub fn field_to_chart(field: &GridField) -> Result<GridField> {
    let comps = field.components();
    if field.max_constraint_violation() > DEFAULT_CONSTRAINT_TOL.max(field.constraint_tol()) {
        return Err(Error::Constraint("only sphere-valued fields have chart coordinates".into()));
    }
    let mut values = Vec::with_capacity(field.grid().node_count() * (comps - 1));
    for i in 0..field.grid().node_count() {
        values.extend(stereographic_inverse(field.node(i))?);
    }
    GridField::new(field.grid().clone(), comps - 1, values)
}

/// The sphere-valued field `S(y)` of a chart field.
pub fn field_from_chart(chart: &GridField) -> Result<GridField> {
    let mut values = Vec::with_capacity(chart.grid().node_count() * (chart.components() + 1));
    for i in 0..chart.grid().node_count() {
        values.extend(stereographic_forward(chart.node(i)));
    }
    GridField::new(chart.grid().clone(), chart.components() + 1, values)?.into_constrained(DEFAULT_CONSTRAINT_TOL)
}

/// Energy of `S(y)` written in chart coordinates:
/// `sum w h^n b(x, S(y)) H(x, c(y) |Dy|)` with `c` the conformal factor,
/// everything sampled at the cell anchors.
pub fn chart_energy(density: &DensityProfile, chart: &GridField, region: &Region) -> Result<f64> {
    let comps = chart.components();
    let dummy = GridField::constant(chart.grid().clone(), &vec![0.0; comps + 1])?;
    check_compatible(density, &dummy, region)?;
    let grid: &Grid = chart.grid();
    let (n, h) = (grid.dim(), grid.spacing());
    let strides = grid.strides();
    let values = chart.values();
    let coef = density.coefficient().values();
    let (cells, weights) = (region.cells(), region.weights());
    let sum = chunked_sum(cells.len(), |range| {
        let mut z = [0.0; MAX_JACOBIAN];
        let mut x = [0.0; MAX_DIM];
        let mut acc = 0.0;
        for idx in range {
            let i = cells[idx];
            cell_jacobian(values, comps, strides, i, h, &mut z);
            let y = &values[i * comps..(i + 1) * comps];
            let t = chart_gradient_factor(y) * sq_norm(&z[..comps * n]).sqrt();
            let mut e = density.h_radial(coef[i], t);
            if density.is_weighted() {
                grid.node_point(i, &mut x[..n]);
                e *= density.modulation_at(&x[..n], &stereographic_forward(y));
            }
            acc += weights[idx] * e;
        }
        acc
    });
    let energy = sum * grid.cell_volume();
    if !energy.is_finite() {
        return Err(Error::Domain("chart energy is not finite".into()));
    }
    Ok(energy)
}
