//! First-variation diagnostics: the weak Euler-Lagrange residual of a
//! sphere-valued field and the comparison with a frozen minimizer.

use serde::{Deserialize, Serialize};

use super::{minimize_frozen_dirichlet, FrozenProblem, SolveOptions, SolveReport};
use crate::energy::{cell_jacobian, check_compatible, sq_norm, v_map, DensityProfile, MAX_JACOBIAN};
use crate::error::{Error, Result};
use crate::grid::{norm, Ball, GridField, Region, MAX_DIM};

/// Value of the weak Euler-Lagrange form together with the sum of the
/// absolute sizes of its two terms, for relative comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElResidual {
    pub value: f64,
    pub scale: f64,
}

impl ElResidual {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.value.abs() / self.scale
        } else {
            0.0
        }
    }
}

/// `sum w h^n b H'(rho)/rho (Du . Dphi - |Du|^2 u . phi)`: the derivative of
/// the energy along `t -> (u + t phi) / |u + t phi|` at `t = 0`, with `b`
/// taken at the current values. Vanishes for critical points.
pub fn el_residual(
    density: &DensityProfile,
    field: &GridField,
    phi: &GridField,
    region: &Region,
    mu: f64,
) -> Result<ElResidual> {
    check_compatible(density, field, region)?;
    if phi.grid() != field.grid() || phi.components() != field.components() {
        return Err(Error::Shape("test field must match the field's lattice and components".into()));
    }
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::Options(format!("regularizer mu = {mu} must be finite and >= 0")));
    }
    if field.max_constraint_violation() > field.constraint_tol().max(1e-8) {
        return Err(Error::Constraint("the residual is defined for sphere-valued fields".into()));
    }
    if phi.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("test field is not bounded".into()));
    }
    let grid = field.grid();
    let touched = region.touched_nodes();
    let free = region.free_nodes();
    if (0..grid.node_count()).any(|i| touched[i] && !free[i] && phi.node(i).iter().any(|v| *v != 0.0)) {
        return Err(Error::Domain("test field must vanish on the boundary layer".into()));
    }

    let (comps, n, h) = (field.components(), grid.dim(), grid.spacing());
    let strides = grid.strides();
    let coef = density.coefficient().values();
    let (u, p) = (field.values(), phi.values());
    let mut z = [0.0; MAX_JACOBIAN];
    let mut dphi = [0.0; MAX_JACOBIAN];
    let mut x = [0.0; MAX_DIM];
    let (mut value, mut scale) = (0.0, 0.0);
    for (idx, &i) in region.cells().iter().enumerate() {
        cell_jacobian(u, comps, strides, i, h, &mut z);
        cell_jacobian(p, comps, strides, i, h, &mut dphi);
        let len = comps * n;
        let z2 = sq_norm(&z[..len]);
        if z2 == 0.0 {
            continue;
        }
        let a = coef[i];
        let rho = (z2 + mu * mu).sqrt();
        let b = if density.is_weighted() {
            grid.node_point(i, &mut x[..n]);
            density.modulation_at(&x[..n], &u[i * comps..(i + 1) * comps])
        } else {
            1.0
        };
        let slope = density.h_slope_over_t(a, rho);
        let w = region.weights()[idx] * b * slope;
        let zd: f64 = z[..len].iter().zip(&dphi[..len]).map(|(a, b)| a * b).sum();
        let ui = &u[i * comps..(i + 1) * comps];
        let pi = &p[i * comps..(i + 1) * comps];
        let up: f64 = ui.iter().zip(pi).map(|(a, b)| a * b).sum();
        value += w * (zd - z2 * up);
        scale += w * (z2.sqrt() * sq_norm(&dphi[..len]).sqrt() + z2 * norm(pi));
    }
    let vol = grid.cell_volume();
    Ok(ElResidual { value: value * vol, scale: scale * vol })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicComparison {
    /// Average of `v` over the input ball, the frozen second argument.
    pub mean_value: Vec<f64>,
    /// Averaged `|V_p(Dv) - V_p(Dh)|^2 + a |V_q(Dv) - V_q(Dh)|^2` over the
    /// half ball.
    pub v_distance: f64,
    pub solve: SolveReport,
}

/// Solves the unconstrained frozen problem on the concentric half ball with
/// boundary values `v` and measures how far `v` is from the solution.
pub fn harmonic_compare(
    density: &DensityProfile,
    v: &GridField,
    ball: &Ball,
    opts: &SolveOptions,
) -> Result<(GridField, HarmonicComparison)> {
    let grid = v.grid();
    let comps = v.components();
    let outer = Region::ball(grid, ball)?;
    check_compatible(density, v, &outer)?;
    let mut mean = vec![0.0; comps];
    let total: f64 = outer.weights().iter().sum();
    for (&i, &w) in outer.cells().iter().zip(outer.weights()) {
        for (m, x) in mean.iter_mut().zip(v.node(i)) {
            *m += w * x / total;
        }
    }
    let half = ball.with_radius(ball.radius / 2.0)?;
    let problem = FrozenProblem {
        ball: half.clone(),
        boundary_values: v.clone(),
        frozen_point_v: mean.clone(),
        constrained: false,
    };
    let (h_field, solve) = minimize_frozen_dirichlet(density, &problem, opts)?;

    let inner = Region::ball(grid, &half)?;
    let (p, q) = (density.exponents().p, density.exponents().q);
    let (n, spacing) = (grid.dim(), grid.spacing());
    let strides = grid.strides();
    let coef = density.coefficient().values();
    let len = comps * n;
    let mut zv = [0.0; MAX_JACOBIAN];
    let mut zh = [0.0; MAX_JACOBIAN];
    let (mut acc, mut wsum) = (0.0, 0.0);
    for (&i, &w) in inner.cells().iter().zip(inner.weights()) {
        cell_jacobian(v.values(), comps, strides, i, spacing, &mut zv);
        cell_jacobian(h_field.values(), comps, strides, i, spacing, &mut zh);
        let diff = |t: f64| {
            let (a, b) = (v_map(&zv[..len], t), v_map(&zh[..len], t));
            a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
        };
        let a = coef[i];
        acc += w * (diff(p) + if a == 0.0 { 0.0 } else { a * diff(q) });
        wsum += w;
    }
    let report = HarmonicComparison { mean_value: mean, v_distance: acc / wsum, solve };
    Ok((h_field, report))
}
