//! Minimization of the discrete energy over sphere-valued fields, frozen
//! Dirichlet problems, the projection/extension construction, stereographic
//! charts and the Euler-Lagrange residual.

mod chart;
mod critical;
mod descent;
mod extension;

pub use chart::{
    chart_energy, chart_gradient_factor, chart_jacobian, field_from_chart, field_to_chart, stereographic_forward,
    stereographic_inverse,
};
pub use critical::{el_residual, harmonic_compare, ElResidual, HarmonicComparison};
pub use descent::{Direction, Status};
pub use extension::{halton_ball_samples, projected_extension, ExtensionReport};

pub(crate) use descent::{descend, Objective, Problem, Retraction};

use serde::{Deserialize, Serialize};

use crate::energy::{
    accumulate_gradient, energy_change_of_values, energy_of_values, h_energy, total_energy, DensityProfile,
};
use crate::error::{Error, Result};
use crate::grid::{norm, Ball, Grid, GridField, Region, DEFAULT_CONSTRAINT_TOL};

/// Knobs of the line-search descent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// First trial step, in units of `h^2` along the L2 gradient.
    pub step0: f64,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    /// Stop when the L2 norm of the admissible gradient falls below this.
    pub grad_tol: f64,
    /// Stop when the relative energy decrease of one step falls below this.
    pub energy_tol: f64,
    /// Regularizer of `|Du|`; `None` means `1e-4 h`.
    pub mu: Option<f64>,
    pub seed: u64,
    pub max_backtracks: usize,
    pub direction: Direction,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iters: 2000,
            step0: 0.1,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            grad_tol: 1e-8,
            energy_tol: 1e-14,
            mu: None,
            seed: 0,
            max_backtracks: 60,
            direction: Direction::Auto,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [("step0", self.step0), ("grad_tol", self.grad_tol), ("energy_tol", self.energy_tol)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Options(format!("{name} = {v} must be positive")));
            }
        }
        for (name, v) in [("armijo_c", self.armijo_c), ("armijo_shrink", self.armijo_shrink)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Options(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        if let Some(mu) = self.mu {
            if !(mu >= 0.0 && mu.is_finite()) {
                return Err(Error::Options(format!("mu = {mu} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    pub fn mu_for(&self, grid: &Grid) -> f64 {
        self.mu.unwrap_or(1e-4 * grid.spacing())
    }
}

/// Energy comparison of a frozen minimizer against a competitor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCheck {
    pub solution_energy: f64,
    pub competitor_energy: f64,
    /// `L / nu` of the density.
    pub factor: f64,
    pub holds: bool,
}

/// `sup |h| <= sqrt(N) sup |boundary data|` for frozen unconstrained solves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxPrincipleCheck {
    pub sup_solution: f64,
    pub sup_boundary: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Unregularized energy of the returned field.
    pub final_energy: f64,
    /// Regularized energies of the accepted iterates, starting with the input.
    pub energy_trace: Vec<f64>,
    pub max_constraint_violation: f64,
    /// L2 norm of the admissible gradient at the returned field.
    pub el_residual_norm: f64,
    pub status: Status,
    pub comparison: Option<ComparisonCheck>,
    pub max_principle: Option<MaxPrincipleCheck>,
}

/// `y / |y|`.
pub fn project_sphere(y: &[f64]) -> Result<Vec<f64>> {
    let r = norm(y);
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::ProjectionUndefined);
    }
    Ok(y.iter().map(|v| v / r).collect())
}

struct FieldObjective<'a> {
    density: &'a DensityProfile,
    grid: &'a Grid,
    comps: usize,
    region: &'a Region,
    mu: f64,
}

impl Objective for FieldObjective<'_> {
    fn energy(&self, values: &[f64]) -> Result<f64> {
        energy_of_values(self.density, self.grid, self.comps, values, self.region, self.mu)
    }

    fn gradient(&self, values: &[f64], grad: &mut [f64]) -> Result<()> {
        grad.iter_mut().for_each(|g| *g = 0.0);
        accumulate_gradient(self.density, self.grid, self.comps, values, self.region, self.mu, grad)
    }

    fn energy_change(&self, old: &[f64], new: &[f64]) -> Result<f64> {
        energy_change_of_values(self.density, self.grid, self.comps, old, new, self.region, self.mu)
    }
}

fn run(
    density: &DensityProfile,
    field: &mut GridField,
    region: &Region,
    free: &[bool],
    retraction: Retraction,
    opts: &SolveOptions,
) -> Result<descent::Outcome> {
    let grid = field.grid().clone();
    let comps = field.components();
    let direction = match (opts.direction, &retraction) {
        (Direction::Auto, Retraction::Sphere) => Direction::Steepest,
        (Direction::Auto, _) => Direction::ConjugateGradient,
        (d, _) => d,
    };
    let objective = FieldObjective { density, grid: &grid, comps, region, mu: opts.mu_for(&grid) };
    let problem = Problem {
        objective: &objective,
        comps,
        free,
        retraction,
        metric: grid.cell_volume(),
        step_unit: grid.spacing().powi(2),
    };
    descend(&problem, field.values_mut(), opts, direction)
}

/// Minimizes the energy over sphere-valued fields that agree with `field0`
/// off the free nodes of `region` (interior nodes strictly inside a ball
/// region, or off the lattice boundary for the full region).
pub fn minimize_constrained(
    density: &DensityProfile,
    field0: &GridField,
    region: &Region,
    opts: &SolveOptions,
) -> Result<(GridField, SolveReport)> {
    opts.validate()?;
    density.exponents().validate()?;
    crate::energy::check_compatible(density, field0, region)?;
    let tol = if field0.is_constrained() { field0.constraint_tol() } else { DEFAULT_CONSTRAINT_TOL };
    let violation = field0.max_constraint_violation();
    if violation > tol || field0.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Constraint(format!(
            "initial field must be sphere-valued and finite (violation {violation:e}, tolerance {tol:e})"
        )));
    }
    let free = region.free_nodes();
    let mut field = field0.clone();
    let outcome = run(density, &mut field, region, &free, Retraction::Sphere, opts)?;
    let field = field.into_constrained(tol.max(DEFAULT_CONSTRAINT_TOL))?;
    let report = SolveReport {
        iterations: outcome.iterations,
        final_energy: total_energy(density, &field, region)?,
        energy_trace: outcome.energy_trace,
        max_constraint_violation: field.max_constraint_violation(),
        el_residual_norm: outcome.grad_norm,
        status: outcome.status,
        comparison: None,
        max_principle: None,
    };
    Ok((field, report))
}

/// Dirichlet problem for the frozen density on a ball.
#[derive(Clone, Debug)]
pub struct FrozenProblem {
    pub ball: Ball,
    /// Supplies the boundary layer; values at free nodes, when finite, seed
    /// the descent.
    pub boundary_values: GridField,
    /// The fixed second argument of the density.
    pub frozen_point_v: Vec<f64>,
    pub constrained: bool,
}

/// Solves the frozen Dirichlet problem. The boundary extension used as the
/// starting point doubles as the competitor of the energy comparison, and
/// unconstrained solves also check the maximum principle.
pub fn minimize_frozen_dirichlet(
    density: &DensityProfile,
    problem: &FrozenProblem,
    opts: &SolveOptions,
) -> Result<(GridField, SolveReport)> {
    opts.validate()?;
    let bv = &problem.boundary_values;
    let grid = bv.grid().clone();
    let comps = bv.components();
    if problem.frozen_point_v.len() != comps {
        return Err(Error::Shape("frozen point and boundary data have different components".into()));
    }
    let frozen = density.frozen_at(&problem.frozen_point_v);
    let region = Region::ball(&grid, &problem.ball)?;
    crate::energy::check_compatible(&frozen, bv, &region)?;
    let free = region.free_nodes();
    let touched = region.touched_nodes();
    if !free.iter().any(|f| *f) {
        return Err(Error::Resolution("the ball holds no interior node".into()));
    }

    let layer: Vec<usize> = (0..grid.node_count()).filter(|&i| touched[i] && !free[i]).collect();
    let missing = layer.iter().filter(|&&i| bv.node(i).iter().any(|v| !v.is_finite())).count();
    if missing > 0 {
        return Err(Error::Boundary(format!("{missing} boundary-layer nodes carry no finite value")));
    }
    if problem.constrained {
        let worst = layer.iter().map(|&i| (norm(bv.node(i)) - 1.0).abs()).fold(0.0, f64::max);
        if worst > 1e-8 {
            return Err(Error::Constraint(format!("boundary data leaves the sphere by {worst:e}")));
        }
    }

    let mut lower = vec![f64::INFINITY; comps];
    let mut upper = vec![f64::NEG_INFINITY; comps];
    let mut mean = vec![0.0; comps];
    for &i in &layer {
        for (c, v) in bv.node(i).iter().enumerate() {
            lower[c] = lower[c].min(*v);
            upper[c] = upper[c].max(*v);
            mean[c] += v / layer.len() as f64;
        }
    }
    let fill =
        if problem.constrained { project_sphere(&mean).unwrap_or_else(|_| bv.node(layer[0]).to_vec()) } else { mean };
    let mut field = bv.clone();
    field.set_constrained(false, DEFAULT_CONSTRAINT_TOL);
    {
        let vals = field.values_mut();
        for i in 0..grid.node_count() {
            if !free[i] {
                continue;
            }
            let node = &mut vals[i * comps..(i + 1) * comps];
            let usable = node.iter().all(|v| v.is_finite()) && (!problem.constrained || norm(node) > 0.0);
            if !usable {
                node.copy_from_slice(&fill);
            } else if problem.constrained {
                let r = norm(node);
                node.iter_mut().for_each(|v| *v /= r);
            } else {
                for c in 0..comps {
                    node[c] = node[c].clamp(lower[c], upper[c]);
                }
            }
        }
    }
    let competitor = field.clone();

    // Truncating a component at the extreme boundary values never increases
    // the energy, so the unique unconstrained minimizer already satisfies the
    // bounds and clamping does not alter the problem.
    let retraction = if problem.constrained {
        Retraction::Sphere
    } else {
        Retraction::Clamp { lower: lower.clone(), upper: upper.clone() }
    };
    let outcome = run(&frozen, &mut field, &region, &free, retraction, opts)?;
    if problem.constrained {
        field.set_constrained(true, DEFAULT_CONSTRAINT_TOL);
    }

    let (nu, l_upper) = frozen.ellipticity_bounds();
    let solution_energy = h_energy(&frozen, &field, &region)?;
    let competitor_energy = h_energy(&frozen, &competitor, &region)?;
    let factor = l_upper / nu;
    let comparison = ComparisonCheck {
        solution_energy,
        competitor_energy,
        factor,
        holds: solution_energy <= factor * competitor_energy,
    };
    let max_principle = (!problem.constrained).then(|| {
        let sup_boundary = layer.iter().flat_map(|&i| bv.node(i).iter().map(|v| v.abs())).fold(0.0, f64::max);
        let sup_solution =
            (0..grid.node_count()).filter(|&i| touched[i]).map(|i| norm(field.node(i))).fold(0.0, f64::max);
        let bound = (comps as f64).sqrt() * sup_boundary;
        MaxPrincipleCheck { sup_solution, sup_boundary, bound, holds: sup_solution <= bound }
    });
    let report = SolveReport {
        iterations: outcome.iterations,
        final_energy: total_energy(&frozen, &field, &region)?,
        energy_trace: outcome.energy_trace,
        max_constraint_violation: if problem.constrained { field.max_constraint_violation() } else { 0.0 },
        el_residual_norm: outcome.grad_norm,
        status: outcome.status,
        comparison: Some(comparison),
        max_principle,
    };
    Ok((field, report))
}

/// Energy comparison of a frozen solution against an arbitrary admissible
/// competitor on the problem's ball.
pub fn check_comparison(
    density: &DensityProfile,
    problem: &FrozenProblem,
    solution: &GridField,
    competitor: &GridField,
) -> Result<ComparisonCheck> {
    let frozen = density.frozen_at(&problem.frozen_point_v);
    let region = Region::ball(solution.grid(), &problem.ball)?;
    let solution_energy = h_energy(&frozen, solution, &region)?;
    let competitor_energy = h_energy(&frozen, competitor, &region)?;
    let (nu, l_upper) = frozen.ellipticity_bounds();
    let factor = l_upper / nu;
    Ok(ComparisonCheck {
        solution_energy,
        competitor_energy,
        factor,
        holds: solution_energy <= factor * competitor_energy,
    })
}
