//! Relative Phi-capacity of a compact set by direct minimization over
//! lattice functions with values in `[0, 1]`.

use serde::{Deserialize, Serialize};

use super::{BoxDomain, Musielak, PointCloudSet};
use crate::error::{Error, Result};
use crate::grid::{Ball, Grid};
use crate::solver::{descend, Direction, Objective, Problem, Retraction, SolveOptions, Status};

/// The open set relative to which the capacity is taken.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum CapacityDomain {
    Ball(Ball),
    Box(BoxDomain),
}

impl CapacityDomain {
    pub fn dim(&self) -> usize {
        match self {
            CapacityDomain::Ball(b) => b.dim(),
            CapacityDomain::Box(b) => b.dim(),
        }
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            CapacityDomain::Ball(b) => {
                (b.center.iter().map(|c| c - b.radius).collect(), b.center.iter().map(|c| c + b.radius).collect())
            }
            CapacityDomain::Box(b) => (b.lower.clone(), b.upper.clone()),
        }
    }

    /// Signed distance to the boundary, positive inside.
    fn depth(&self, x: &[f64]) -> f64 {
        match self {
            CapacityDomain::Ball(b) => b.radius - dist(&b.center, x),
            CapacityDomain::Box(b) => b.boundary_distance(x),
        }
    }
}

/// The compact set `K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CapacityTarget {
    Empty,
    /// Each point pins its nearest lattice node.
    Points(PointCloudSet),
    /// Closed ball; pins every node inside it.
    Ball(Ball),
    Union(Vec<CapacityTarget>),
}

impl CapacityTarget {
    fn is_empty(&self) -> bool {
        match self {
            CapacityTarget::Empty => true,
            CapacityTarget::Points(set) => set.is_empty(),
            CapacityTarget::Ball(_) => false,
            CapacityTarget::Union(parts) => parts.iter().all(CapacityTarget::is_empty),
        }
    }

    fn distance(&self, x: &[f64]) -> f64 {
        match self {
            CapacityTarget::Empty => f64::INFINITY,
            CapacityTarget::Points(set) => set.points.iter().map(|p| dist(p, x)).fold(f64::INFINITY, f64::min),
            CapacityTarget::Ball(b) => (dist(&b.center, x) - b.radius).max(0.0),
            CapacityTarget::Union(parts) => parts.iter().map(|t| t.distance(x)).fold(f64::INFINITY, f64::min),
        }
    }

    /// `dist(K, boundary of Omega)`, negative if `K` leaves `Omega`.
    fn clearance(&self, domain: &CapacityDomain) -> f64 {
        match self {
            CapacityTarget::Empty => f64::INFINITY,
            CapacityTarget::Points(set) => set.points.iter().map(|p| domain.depth(p)).fold(f64::INFINITY, f64::min),
            CapacityTarget::Ball(b) => domain.depth(&b.center) - b.radius,
            CapacityTarget::Union(parts) => parts.iter().map(|t| t.clearance(domain)).fold(f64::INFINITY, f64::min),
        }
    }

    fn mark(&self, grid: &Grid, out: &mut [bool]) -> Result<()> {
        match self {
            CapacityTarget::Empty => {}
            CapacityTarget::Points(set) => {
                for p in &set.points {
                    if p.len() != grid.dim() {
                        return Err(Error::Shape("target point dimension differs from the domain".into()));
                    }
                    out[nearest_node(grid, p)] = true;
                }
            }
            CapacityTarget::Ball(b) => {
                if b.dim() != grid.dim() {
                    return Err(Error::Shape("target ball dimension differs from the domain".into()));
                }
                grid.nodes_in_ball(b).into_iter().for_each(|i| out[i] = true);
            }
            CapacityTarget::Union(parts) => {
                for t in parts {
                    t.mark(grid, out)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    /// Lattice nodes along the first axis of the bounding box.
    pub mesh: usize,
    pub spacing: f64,
    /// Minimal discrete energy found; an upper bound for the discrete capacity.
    pub bound: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub status: Status,
    pub pinned_nodes: usize,
    pub free_nodes: usize,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn nearest_node(grid: &Grid, x: &[f64]) -> usize {
    let h = grid.spacing();
    let multi: Vec<usize> = x
        .iter()
        .zip(grid.lower().iter().zip(grid.dims()))
        .map(|(v, (lo, &d))| (((v - lo) / h).round().max(0.0) as usize).min(d - 1))
        .collect();
    grid.index(&multi)
}

/// `sum_cells h^n Phi(center, |Df|)` with forward differences at each
/// cell anchor.
struct CapacityObjective<'a> {
    phi: &'a dyn Musielak,
    grid: &'a Grid,
    anchors: Vec<usize>,
    centers: Vec<f64>,
}

impl CapacityObjective<'_> {
    fn cell_gradient(&self, values: &[f64], anchor: usize, df: &mut [f64]) -> f64 {
        let h = self.grid.spacing();
        let mut t2 = 0.0;
        for (k, &s) in self.grid.strides().iter().enumerate() {
            df[k] = (values[anchor + s] - values[anchor]) / h;
            t2 += df[k] * df[k];
        }
        t2.sqrt()
    }

    fn center(&self, cell: usize) -> &[f64] {
        let n = self.grid.dim();
        &self.centers[cell * n..(cell + 1) * n]
    }

    fn cell_energy(&self, values: &[f64], cell: usize, df: &mut [f64]) -> Result<f64> {
        let t = self.cell_gradient(values, self.anchors[cell], df);
        let v = self.phi.eval(self.center(cell), t);
        if !v.is_finite() {
            return Err(Error::Domain(format!("Phi is not finite at |Df| = {t}")));
        }
        Ok(v)
    }
}

impl Objective for CapacityObjective<'_> {
    fn energy(&self, values: &[f64]) -> Result<f64> {
        let mut df = vec![0.0; self.grid.dim()];
        let mut sum = 0.0;
        for cell in 0..self.anchors.len() {
            sum += self.cell_energy(values, cell, &mut df)?;
        }
        Ok(sum * self.grid.cell_volume())
    }

    fn gradient(&self, values: &[f64], grad: &mut [f64]) -> Result<()> {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let h = self.grid.spacing();
        let vol = self.grid.cell_volume();
        let mut df = vec![0.0; self.grid.dim()];
        for (cell, &anchor) in self.anchors.iter().enumerate() {
            let t = self.cell_gradient(values, anchor, &mut df);
            if t == 0.0 {
                continue;
            }
            let w = vol * self.phi.derivative(self.center(cell), t) / t / h;
            for (k, &s) in self.grid.strides().iter().enumerate() {
                grad[anchor + s] += w * df[k];
                grad[anchor] -= w * df[k];
            }
        }
        Ok(())
    }

    fn energy_change(&self, old: &[f64], new: &[f64]) -> Result<f64> {
        let mut df = vec![0.0; self.grid.dim()];
        let mut sum = 0.0;
        for cell in 0..self.anchors.len() {
            sum += self.cell_energy(new, cell, &mut df)? - self.cell_energy(old, cell, &mut df)?;
        }
        Ok(sum * self.grid.cell_volume())
    }
}

/// Lattice, pinned values and free mask for one mesh.
struct Setup {
    grid: Grid,
    values: Vec<f64>,
    free: Vec<bool>,
    pinned: usize,
}

fn setup(phi: &dyn Musielak, target: &CapacityTarget, domain: &CapacityDomain, mesh: usize) -> Result<Setup> {
    let n = domain.dim();
    if phi.domain().dim() != n {
        return Err(Error::Shape("Phi and the capacity domain differ in dimension".into()));
    }
    let (lower, upper) = domain.bounding_box();
    let pd = phi.domain();
    let tol = 1e-12;
    if lower.iter().zip(&pd.lower).any(|(a, b)| *a < b - tol) || upper.iter().zip(&pd.upper).any(|(a, b)| *a > b + tol)
    {
        return Err(Error::Geometry("the capacity domain leaves the domain of Phi".into()));
    }
    let clearance = target.clearance(domain);
    if !(clearance > 0.0) {
        return Err(Error::Geometry(format!("K touches or leaves the boundary (clearance {clearance})")));
    }
    let grid = Grid::from_extents(&lower, &upper, mesh)?;
    let h = grid.spacing();
    if !target.is_empty() && clearance < 2.0 * h {
        return Err(Error::Resolution(format!("dist(K, boundary) = {clearance} is below two lattice spacings {h}")));
    }
    let count = grid.node_count();
    let mut in_k = vec![false; count];
    target.mark(&grid, &mut in_k)?;
    let mut values = vec![0.0; count];
    let mut free = vec![false; count];
    let mut x = vec![0.0; n];
    for i in 0..count {
        grid.node_point(i, &mut x);
        let inside = domain.depth(&x) > tol * h;
        if in_k[i] {
            if !inside {
                return Err(Error::Geometry("a node of K lies outside the domain".into()));
            }
            values[i] = 1.0;
        } else if inside {
            free[i] = true;
            values[i] = (1.0 - target.distance(&x) / clearance).clamp(0.0, 1.0);
        }
    }
    let pinned = in_k.iter().filter(|&&k| k).count();
    Ok(Setup { grid, values, free, pinned })
}

fn solve(phi: &dyn Musielak, mesh: usize, mut s: Setup, opts: &SolveOptions) -> Result<(CapacityReport, Setup)> {
    opts.validate()?;
    let grid = s.grid.clone();
    let n = grid.dim();
    let h = grid.spacing();
    // Cells whose stencil holds a free node or a jump between pinned values.
    let strides = grid.strides().to_vec();
    let mut anchors = Vec::new();
    let mut centers = Vec::new();
    let mut x = vec![0.0; n];
    for i in grid.cell_anchors() {
        let stencil = || std::iter::once(i).chain(strides.iter().map(move |st| i + st));
        let active = stencil().any(|j| s.free[j]) || stencil().any(|j| s.values[j] != s.values[i]);
        if active {
            anchors.push(i);
            grid.node_point(i, &mut x);
            centers.extend(x.iter().map(|v| v + 0.5 * h));
        }
    }
    let free_nodes = s.free.iter().filter(|&&f| f).count();
    let objective = CapacityObjective { phi, grid: &grid, anchors, centers };
    let (iterations, grad_norm, status) = if free_nodes == 0 {
        (0, 0.0, Status::GradientTolerance)
    } else {
        let problem = Problem {
            objective: &objective,
            comps: 1,
            free: &s.free,
            retraction: Retraction::Clamp { lower: vec![0.0], upper: vec![1.0] },
            metric: grid.cell_volume(),
            step_unit: h * h,
        };
        let direction = match opts.direction {
            Direction::Auto => Direction::ConjugateGradient,
            d => d,
        };
        let out = descend(&problem, &mut s.values, opts, direction)?;
        (out.iterations, out.grad_norm, out.status)
    };
    let bound = objective.energy(&s.values)?;
    let report =
        CapacityReport { mesh, spacing: h, bound, iterations, grad_norm, status, pinned_nodes: s.pinned, free_nodes };
    Ok((report, s))
}

/// Minimal discrete `int Phi(x, |Df|)` over lattice functions with `f = 1`
/// on the nodes of `K`, `f = 0` on nodes outside or on the boundary of
/// `Omega`, and `0 <= f <= 1`. `mesh` is the node count along the first
/// axis of the bounding box of `Omega`.
pub fn capacity_estimate(
    phi: &dyn Musielak,
    target: &CapacityTarget,
    domain: &CapacityDomain,
    mesh: usize,
    opts: &SolveOptions,
) -> Result<CapacityReport> {
    if target.is_empty() {
        let (lower, upper) = domain.bounding_box();
        let grid = Grid::from_extents(&lower, &upper, mesh)?;
        return Ok(CapacityReport {
            mesh,
            spacing: grid.spacing(),
            bound: 0.0,
            iterations: 0,
            grad_norm: 0.0,
            status: Status::GradientTolerance,
            pinned_nodes: 0,
            free_nodes: 0,
        });
    }
    let s = setup(phi, target, domain, mesh)?;
    Ok(solve(phi, mesh, s, opts)?.0)
}

/// Multilinear interpolation of a lattice function at `x`.
fn interpolate(grid: &Grid, values: &[f64], x: &[f64]) -> f64 {
    let n = grid.dim();
    let h = grid.spacing();
    let mut base = vec![0usize; n];
    let mut frac = vec![0.0; n];
    for k in 0..n {
        let s = ((x[k] - grid.lower()[k]) / h).clamp(0.0, (grid.dims()[k] - 1) as f64);
        let i = (s.floor() as usize).min(grid.dims()[k] - 2);
        base[k] = i;
        frac[k] = s - i as f64;
    }
    let anchor = grid.index(&base);
    grid.corner_offsets()
        .iter()
        .enumerate()
        .map(|(c, off)| {
            let w: f64 = (0..n).map(|k| if c >> k & 1 == 1 { frac[k] } else { 1.0 - frac[k] }).product();
            w * values[anchor + off]
        })
        .sum()
}

/// Capacity bounds on successively finer meshes; every level starts from
/// the interpolated solution of the previous one.
pub fn capacity_refinement(
    phi: &dyn Musielak,
    target: &CapacityTarget,
    domain: &CapacityDomain,
    meshes: &[usize],
    opts: &SolveOptions,
) -> Result<Vec<CapacityReport>> {
    if meshes.is_empty() || meshes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Options("refinement meshes must be non-empty and increasing".into()));
    }
    if target.is_empty() {
        return meshes.iter().map(|&m| capacity_estimate(phi, target, domain, m, opts)).collect();
    }
    let mut reports = Vec::with_capacity(meshes.len());
    let mut previous: Option<Setup> = None;
    for &mesh in meshes {
        let mut s = setup(phi, target, domain, mesh)?;
        if let Some(coarse) = &previous {
            let mut x = vec![0.0; s.grid.dim()];
            for i in 0..s.values.len() {
                if s.free[i] {
                    s.grid.node_point(i, &mut x);
                    s.values[i] = interpolate(&coarse.grid, &coarse.values, &x).clamp(0.0, 1.0);
                }
            }
        }
        let (report, solved) = solve(phi, mesh, s, opts)?;
        reports.push(report);
        previous = Some(solved);
    }
    Ok(reports)
}
