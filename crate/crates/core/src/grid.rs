//! Uniform lattices, balls, integration regions and the two grid-sampled
//! data types (vector fields and scalar coefficients).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest lattice dimension supported. Cell loops enumerate `2^n` corners and
/// boundary cells are sub-sampled with `k^n` points, so this stays small.
pub const MAX_DIM: usize = 4;

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * std::f64::consts::PI / n as f64,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct GridSpec {
    dims: Vec<usize>,
    lower: Vec<f64>,
    spacing: f64,
}

/// Uniform lattice in `R^n` with equal spacing along every axis. Nodes are
/// numbered row-major (last axis fastest).
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    dims: Vec<usize>,
    lower: Vec<f64>,
    spacing: f64,
    strides: Vec<usize>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dims", &self.dims)
            .field("lower", &self.lower)
            .field("spacing", &self.spacing)
            .finish()
    }
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;
    fn try_from(spec: GridSpec) -> Result<Self> {
        Grid::new(spec.dims, spec.lower, spec.spacing)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec { dims: g.dims, lower: g.lower, spacing: g.spacing }
    }
}

impl Grid {
    pub fn new(dims: Vec<usize>, lower: Vec<f64>, spacing: f64) -> Result<Self> {
        let n = dims.len();
        if n == 0 || n > MAX_DIM {
            return Err(Error::Shape(format!("lattice dimension {n} not in 1..={MAX_DIM}")));
        }
        if lower.len() != n {
            return Err(Error::Shape(format!("lower corner has {} coordinates, expected {n}", lower.len())));
        }
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::Shape("every axis needs at least two nodes".into()));
        }
        if !(spacing.is_finite() && spacing > 0.0) || lower.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("spacing must be positive and coordinates finite".into()));
        }
        let mut strides = vec![1usize; n];
        for k in (0..n - 1).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        Ok(Grid { dims, lower, spacing, strides })
    }

    /// Cube `[lower, upper]^n` with `nodes` nodes per axis.
    pub fn cube(n: usize, lower: f64, upper: f64, nodes: usize) -> Result<Self> {
        if nodes < 2 || !(upper > lower) {
            return Err(Error::Shape("cube needs upper > lower and at least two nodes".into()));
        }
        let h = (upper - lower) / (nodes - 1) as f64;
        Grid::new(vec![nodes; n], vec![lower; n], h)
    }

    /// Box `[lower, upper]` whose first axis carries `nodes` nodes; the other
    /// axes must be commensurate with the resulting spacing.
    pub fn from_extents(lower: &[f64], upper: &[f64], nodes: usize) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Shape("lower and upper corners disagree in dimension".into()));
        }
        if nodes < 2 {
            return Err(Error::Shape("at least two nodes per axis are required".into()));
        }
        let h = (upper[0] - lower[0]) / (nodes - 1) as f64;
        if !(h > 0.0) {
            return Err(Error::Shape("upper corner must exceed lower corner".into()));
        }
        let mut dims = Vec::with_capacity(lower.len());
        for (k, (&lo, &hi)) in lower.iter().zip(upper).enumerate() {
            let extent = hi - lo;
            let cells = (extent / h).round();
            if cells < 1.0 || ((cells * h) - extent).abs() > 1e-9 * extent.abs().max(1.0) {
                return Err(Error::Shape(format!("axis {k} extent {extent} is not a multiple of the spacing {h}")));
            }
            dims.push(cells as usize + 1);
        }
        Grid::new(dims, lower.to_vec(), h)
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.dims).map(|(lo, &d)| lo + (d - 1) as f64 * self.spacing).collect()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn node_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Volume `h^n` of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    pub fn check_node(&self, node: usize) -> Result<()> {
        let len = self.node_count();
        if node >= len {
            Err(Error::Index { index: node, len })
        } else {
            Ok(())
        }
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, node: usize, out: &mut [usize]) {
        let mut rest = node;
        for (k, s) in self.strides.iter().enumerate() {
            out[k] = rest / s;
            rest %= s;
        }
    }

    pub fn node_point(&self, node: usize, out: &mut [f64]) {
        let mut rest = node;
        for (k, s) in self.strides.iter().enumerate() {
            out[k] = self.lower[k] + (rest / s) as f64 * self.spacing;
            rest %= s;
        }
    }

    pub fn point(&self, node: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        self.node_point(node, &mut p);
        p
    }

    /// Whether `node` is the lower corner of a cell.
    pub fn is_cell_anchor(&self, node: usize) -> bool {
        let mut rest = node;
        for (s, &d) in self.strides.iter().zip(&self.dims) {
            if rest / s + 1 >= d {
                return false;
            }
            rest %= s;
        }
        true
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        let mut rest = node;
        for (s, &d) in self.strides.iter().zip(&self.dims) {
            let i = rest / s;
            if i == 0 || i + 1 == d {
                return true;
            }
            rest %= s;
        }
        false
    }

    /// Node offsets of the `2^n` corners of a cell relative to its anchor;
    /// bit `k` of the corner number selects the upper node along axis `k`.
    pub fn corner_offsets(&self) -> Vec<usize> {
        let n = self.dim();
        (0..1usize << n).map(|c| (0..n).filter(|k| c >> k & 1 == 1).map(|k| self.strides[k]).sum()).collect()
    }

    pub fn cell_anchors(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&i| self.is_cell_anchor(i)).collect()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        let tol = 1e-12 * self.spacing;
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.dims))
                .all(|(xi, (lo, &d))| *xi >= lo - tol && *xi <= lo + (d - 1) as f64 * self.spacing + tol)
    }

    /// Whether the closed ball lies inside the lattice box.
    pub fn contains_ball(&self, ball: &Ball) -> bool {
        let tol = 1e-12 * self.spacing;
        let upper = self.upper();
        ball.center.len() == self.dim()
            && (0..self.dim()).all(|k| {
                ball.center[k] - ball.radius >= self.lower[k] - tol && ball.center[k] + ball.radius <= upper[k] + tol
            })
    }

    /// Per-axis inclusive node index range covering `[c - r, c + r]`, or
    /// `None` if the interval misses the lattice along some axis.
    pub(crate) fn index_box(&self, center: &[f64], radius: f64) -> Option<Vec<(usize, usize)>> {
        let mut out = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            let lo = ((center[k] - radius - self.lower[k]) / self.spacing - 1e-9).ceil();
            let hi = ((center[k] + radius - self.lower[k]) / self.spacing + 1e-9).floor();
            let lo = lo.max(0.0);
            let hi = hi.min((self.dims[k] - 1) as f64);
            if hi < lo {
                return None;
            }
            out.push((lo as usize, hi as usize));
        }
        Some(out)
    }

    /// Visit every multi-index inside an index box.
    pub(crate) fn for_each_in_box(&self, bx: &[(usize, usize)], mut f: impl FnMut(usize)) {
        let n = bx.len();
        let mut mi: Vec<usize> = bx.iter().map(|b| b.0).collect();
        loop {
            f(self.index(&mi));
            let mut k = n;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                if mi[k] < bx[k].1 {
                    mi[k] += 1;
                    break;
                }
                mi[k] = bx[k].0;
            }
        }
    }

    /// Nodes lying in the closed ball, in increasing index order.
    pub fn nodes_in_ball(&self, ball: &Ball) -> Vec<usize> {
        let Some(bx) = self.index_box(&ball.center, ball.radius) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut p = vec![0.0; self.dim()];
        self.for_each_in_box(&bx, |i| {
            self.node_point(i, &mut p);
            if ball.contains(&p) {
                out.push(i);
            }
        });
        out
    }

    fn check_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self != other {
            Err(Error::Shape(format!("{what} lives on a different lattice")))
        } else {
            Ok(())
        }
    }
}

/// Closed ball `{x : |x - center| <= radius}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("ball radius {radius} must be positive and finite")));
        }
        Ok(Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dist2(&self.center, x) <= self.radius * self.radius * (1.0 + 1e-12)
    }

    pub fn volume(&self) -> f64 {
        unit_ball_volume(self.dim()) * self.radius.powi(self.dim() as i32)
    }

    pub fn with_radius(&self, radius: f64) -> Result<Ball> {
        Ball::new(self.center.clone(), radius)
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    Full,
    Ball(Ball),
}

/// A set of weighted lattice cells over which energies are integrated.
///
/// For a ball, cells entirely inside get weight 1, cells straddling the
/// sphere get the fraction of sub-cell sample points inside, and cells
/// entirely outside are dropped.
#[derive(Clone, Debug)]
pub struct Region {
    grid: Grid,
    shape: Shape,
    cells: Vec<usize>,
    weights: Vec<f64>,
}

impl Region {
    pub fn full(grid: &Grid) -> Region {
        let cells = grid.cell_anchors();
        let weights = vec![1.0; cells.len()];
        Region { grid: grid.clone(), shape: Shape::Full, cells, weights }
    }

    pub fn ball(grid: &Grid, ball: &Ball) -> Result<Region> {
        if ball.dim() != grid.dim() {
            return Err(Error::Shape("ball and lattice dimensions differ".into()));
        }
        let n = grid.dim();
        let h = grid.spacing();
        let sub: usize = match n {
            1 => 16,
            2 => 8,
            _ => 4,
        };
        let samples = sub.pow(n as u32);
        let r2 = ball.radius * ball.radius;
        let mut cells = Vec::new();
        let mut weights = Vec::new();
        let Some(bx) = grid.index_box(&ball.center, ball.radius + h) else {
            return Err(Error::EmptyRegion("ball does not meet the lattice".into()));
        };
        let mut anchor = vec![0.0; n];
        let mut sample = vec![0.0; n];
        let mut digits = vec![0usize; n];
        grid.for_each_in_box(&bx, |node| {
            if !grid.is_cell_anchor(node) {
                return;
            }
            grid.node_point(node, &mut anchor);
            let (mut near, mut far) = (0.0, 0.0);
            for k in 0..n {
                let lo = anchor[k] - ball.center[k];
                let hi = lo + h;
                let nearest = if lo > 0.0 {
                    lo
                } else if hi < 0.0 {
                    hi
                } else {
                    0.0
                };
                near += nearest * nearest;
                far += lo.abs().max(hi.abs()).powi(2);
            }
            let w = if far <= r2 {
                1.0
            } else if near > r2 {
                0.0
            } else {
                let mut inside = 0usize;
                for s in 0..samples {
                    let mut rest = s;
                    for d in digits.iter_mut() {
                        *d = rest % sub;
                        rest /= sub;
                    }
                    for k in 0..n {
                        sample[k] = anchor[k] + h * (digits[k] as f64 + 0.5) / sub as f64;
                    }
                    if dist2(&sample, &ball.center) <= r2 {
                        inside += 1;
                    }
                }
                inside as f64 / samples as f64
            };
            if w > 0.0 {
                cells.push(node);
                weights.push(w);
            }
        });
        if cells.is_empty() {
            return Err(Error::EmptyRegion(format!("ball of radius {} contains no lattice cell", ball.radius)));
        }
        Ok(Region { grid: grid.clone(), shape: Shape::Ball(ball.clone()), cells, weights })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ball_shape(&self) -> Option<&Ball> {
        match &self.shape {
            Shape::Ball(b) => Some(b),
            Shape::Full => None,
        }
    }

    /// Lebesgue measure of the region as seen by the quadrature.
    pub fn measure(&self) -> f64 {
        self.weights.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Nodes that are corners of at least one region cell.
    pub fn touched_nodes(&self) -> Vec<bool> {
        let mut mask = vec![false; self.grid.node_count()];
        let corners = self.grid.corner_offsets();
        for &c in &self.cells {
            for off in &corners {
                mask[c + off] = true;
            }
        }
        mask
    }

    /// Degrees of freedom of a Dirichlet problem on the region: nodes off the
    /// lattice boundary and, for a ball, strictly inside it.
    pub fn free_nodes(&self) -> Vec<bool> {
        let touched = self.touched_nodes();
        let mut p = vec![0.0; self.grid.dim()];
        (0..self.grid.node_count())
            .map(|i| {
                if !touched[i] || self.grid.is_boundary_node(i) {
                    return false;
                }
                match &self.shape {
                    Shape::Full => true,
                    Shape::Ball(b) => {
                        self.grid.node_point(i, &mut p);
                        dist2(&p, &b.center) < b.radius * b.radius * (1.0 - 1e-12)
                    }
                }
            })
            .collect()
    }

    pub(crate) fn check_grid(&self, grid: &Grid) -> Result<()> {
        self.grid.check_same(grid, "region")
    }
}

/// Discrete map from the lattice into `R^N`, stored node-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    grid: Grid,
    components: usize,
    values: Vec<f64>,
    constrained: bool,
    constraint_tol: f64,
}

/// Default tolerance on `| |u| - 1 |` for sphere-valued fields.
pub const DEFAULT_CONSTRAINT_TOL: f64 = 1e-10;

impl GridField {
    pub fn new(grid: Grid, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 {
            return Err(Error::Shape("a field needs at least one component".into()));
        }
        if values.len() != grid.node_count() * components {
            return Err(Error::Shape(format!(
                "{} values supplied for {} nodes with {components} components",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(GridField { grid, components, values, constrained: false, constraint_tol: DEFAULT_CONSTRAINT_TOL })
    }

    pub fn constant(grid: Grid, value: &[f64]) -> Result<Self> {
        let values = value.iter().copied().cycle().take(grid.node_count() * value.len()).collect();
        GridField::new(grid, value.len(), values)
    }

    pub fn from_fn(grid: Grid, components: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> Result<Self> {
        let n = grid.dim();
        let mut values = vec![0.0; grid.node_count() * components];
        let mut p = vec![0.0; n];
        for (i, chunk) in values.chunks_mut(components).enumerate() {
            grid.node_point(i, &mut p);
            f(&p, chunk);
        }
        GridField::new(grid, components, values)
    }

    /// Mark the field as sphere-valued, verifying the constraint.
    pub fn into_constrained(mut self, tol: f64) -> Result<Self> {
        self.constrained = true;
        self.constraint_tol = tol;
        let v = self.max_constraint_violation();
        if v > tol {
            return Err(Error::Constraint(format!("node-wise | |u| - 1 | reaches {v:e} > {tol:e}")));
        }
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access to the raw values. Callers that edit a constrained
    /// field are responsible for keeping it on the sphere.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn node(&self, node: usize) -> &[f64] {
        &self.values[node * self.components..(node + 1) * self.components]
    }

    pub fn is_constrained(&self) -> bool {
        self.constrained
    }

    pub fn constraint_tol(&self) -> f64 {
        self.constraint_tol
    }

    pub(crate) fn set_constrained(&mut self, constrained: bool, tol: f64) {
        self.constrained = constrained;
        self.constraint_tol = tol;
    }

    /// Largest node-wise `| |u| - 1 |` over finite nodes.
    pub fn max_constraint_violation(&self) -> f64 {
        self.values.chunks(self.components).map(|u| (norm(u) - 1.0).abs()).filter(|v| v.is_finite()).fold(0.0, f64::max)
    }
}

type ExactFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Nonnegative modulating coefficient sampled on the lattice, with an
/// estimate of its Hölder seminorm of order `alpha`.
///
/// When built from a closure the closure is retained and used for
/// off-node evaluation; otherwise off-node values are interpolated
/// multilinearly.
#[derive(Clone)]
pub struct CoefficientField {
    grid: Grid,
    values: Vec<f64>,
    alpha: f64,
    holder_seminorm: f64,
    exact: Option<ExactFn>,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("grid", &self.grid)
            .field("alpha", &self.alpha)
            .field("holder_seminorm", &self.holder_seminorm)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

/// Default number of node pairs examined when estimating a seminorm.
pub const DEFAULT_PAIR_BUDGET: usize = 2_000_000;

/// Safety margin applied to sampled Hölder quotients.
pub const SEMINORM_INFLATION: f64 = 1.1;

impl CoefficientField {
    pub fn zero(grid: &Grid) -> Self {
        CoefficientField::constant(grid, 0.0).expect("zero is a valid coefficient")
    }

    pub fn constant(grid: &Grid, value: f64) -> Result<Self> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::Domain(format!("coefficient value {value} must be finite and >= 0")));
        }
        Ok(CoefficientField {
            grid: grid.clone(),
            values: vec![value; grid.node_count()],
            alpha: 1.0,
            holder_seminorm: 0.0,
            exact: Some(Arc::new(move |_| value)),
        })
    }

    /// Sample values without an analytic form; the seminorm is estimated.
    pub fn from_values(grid: &Grid, alpha: f64, values: Vec<f64>) -> Result<Self> {
        Self::check_alpha(alpha)?;
        if values.len() != grid.node_count() {
            return Err(Error::Shape("one coefficient value per node is required".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!("coefficient value {v} must be finite and >= 0")));
        }
        let raw = estimate_holder_quotient(grid, &values, alpha, DEFAULT_PAIR_BUDGET);
        Ok(CoefficientField {
            grid: grid.clone(),
            values,
            alpha,
            holder_seminorm: raw * SEMINORM_INFLATION,
            exact: None,
        })
    }

    /// Sample an analytic coefficient; the seminorm is estimated from the
    /// node samples and the closure is kept for off-node evaluation.
    pub fn from_fn<F>(grid: &Grid, alpha: f64, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let values = (0..grid.node_count()).map(|i| f(&grid.point(i))).collect();
        let mut field = CoefficientField::from_values(grid, alpha, values)?;
        field.exact = Some(Arc::new(f));
        Ok(field)
    }

    /// As [`CoefficientField::from_fn`] but with a known seminorm.
    pub fn from_fn_with_seminorm<F>(grid: &Grid, alpha: f64, seminorm: f64, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::check_alpha(alpha)?;
        if !(seminorm >= 0.0 && seminorm.is_finite()) {
            return Err(Error::Domain("seminorm must be finite and >= 0".into()));
        }
        let values: Vec<f64> = (0..grid.node_count()).map(|i| f(&grid.point(i))).collect();
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!("coefficient value {v} must be finite and >= 0")));
        }
        Ok(CoefficientField { grid: grid.clone(), values, alpha, holder_seminorm: seminorm, exact: Some(Arc::new(f)) })
    }

    fn check_alpha(alpha: f64) -> Result<()> {
        if alpha > 0.0 && alpha <= 1.0 {
            Ok(())
        } else {
            Err(Error::Exponent(format!("Hölder exponent {alpha} must lie in (0, 1]")))
        }
    }

    /// Same coefficient resampled on another lattice. Requires an analytic
    /// closure.
    pub fn resample(&self, grid: &Grid) -> Result<Self> {
        let Some(f) = self.exact.clone() else {
            return Err(Error::Options("resampling needs an analytic coefficient".into()));
        };
        let values: Vec<f64> = (0..grid.node_count()).map(|i| f(&grid.point(i))).collect();
        Ok(CoefficientField {
            grid: grid.clone(),
            values,
            alpha: self.alpha,
            holder_seminorm: self.holder_seminorm,
            exact: Some(f),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn holder_seminorm(&self) -> f64 {
        self.holder_seminorm
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Coefficient at an arbitrary point of the lattice box.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        if let Some(f) = &self.exact {
            return f(x);
        }
        let g = &self.grid;
        let n = g.dim();
        let mut base = 0usize;
        let mut frac = [0.0f64; MAX_DIM];
        for k in 0..n {
            let t = (x[k] - g.lower[k]) / g.spacing;
            let i = (t.floor().max(0.0) as usize).min(g.dims[k] - 2);
            frac[k] = (t - i as f64).clamp(0.0, 1.0);
            base += i * g.strides[k];
        }
        let mut acc = 0.0;
        for c in 0..1usize << n {
            let mut w = 1.0;
            let mut off = 0;
            for k in 0..n {
                if c >> k & 1 == 1 {
                    w *= frac[k];
                    off += g.strides[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            if w != 0.0 {
                acc += w * self.values[base + off];
            }
        }
        acc
    }

    /// Minimum and maximum over the node samples in the closed ball. A ball
    /// that holds no node but meets the lattice box falls back to the value
    /// at its center.
    pub fn min_max_in_ball(&self, ball: &Ball) -> Result<(f64, f64)> {
        let nodes = self.grid.nodes_in_ball(ball);
        if nodes.is_empty() {
            let meets = (0..self.grid.dim()).all(|k| {
                ball.center[k] + ball.radius >= self.grid.lower[k]
                    && ball.center[k] - ball.radius <= self.grid.upper()[k]
            });
            if !meets {
                return Err(Error::EmptyRegion("ball is disjoint from the lattice".into()));
            }
            let v = self.value_at(&ball.center);
            return Ok((v, v));
        }
        Ok(nodes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(self.values[i]), hi.max(self.values[i]))))
    }

    pub(crate) fn check_grid(&self, grid: &Grid) -> Result<()> {
        self.grid.check_same(grid, "coefficient")
    }
}

/// Largest two-point quotient `|a(x) - a(y)| / |x - y|^alpha` over node
/// pairs. Exhaustive when the pair count fits the budget; otherwise every
/// node is paired with its neighbours inside a cube whose size fits the
/// budget, and additionally with the global extremal nodes.
pub fn estimate_holder_quotient(grid: &Grid, values: &[f64], alpha: f64, budget: usize) -> f64 {
    let m = values.len();
    if m < 2 {
        return 0.0;
    }
    let pts: Vec<Vec<f64>> = (0..m).map(|i| grid.point(i)).collect();
    let quotient = |i: usize, j: usize| -> f64 {
        let d = dist2(&pts[i], &pts[j]).sqrt();
        (values[i] - values[j]).abs() / d.powf(alpha)
    };
    let total = m * (m - 1) / 2;
    if total <= budget {
        use rayon::prelude::*;
        return (0..m)
            .into_par_iter()
            .map(|i| ((i + 1)..m).map(|j| quotient(i, j)).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max);
    }
    let n = grid.dim();
    let per_node = (budget / m).max(1);
    let mut w = 1usize;
    while (2 * (w + 1) + 1).pow(n as u32) <= per_node && w < 64 {
        w += 1;
    }
    let (mut imin, mut imax) = (0, 0);
    for i in 0..m {
        if values[i] < values[imin] {
            imin = i;
        }
        if values[i] > values[imax] {
            imax = i;
        }
    }
    use rayon::prelude::*;
    (0..m)
        .into_par_iter()
        .map(|i| {
            let mut mi = vec![0usize; n];
            grid.multi_index(i, &mut mi);
            let bx: Vec<(usize, usize)> =
                (0..n).map(|k| (mi[k].saturating_sub(w), (mi[k] + w).min(grid.dims()[k] - 1))).collect();
            let mut best: f64 = 0.0;
            grid.for_each_in_box(&bx, |j| {
                if j > i {
                    best = best.max(quotient(i, j));
                }
            });
            for &e in &[imin, imax] {
                if e != i {
                    best = best.max(quotient(i, e));
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn index_round_trip() {
        let g = Grid::new(vec![3, 4, 5], vec![0.0; 3], 0.5).unwrap();
        let mut mi = [0usize; 3];
        for i in 0..g.node_count() {
            g.multi_index(i, &mut mi);
            assert_eq!(g.index(&mi), i);
        }
        assert_eq!(g.strides(), &[20, 5, 1]);
        assert_eq!(g.corner_offsets(), vec![0, 20, 5, 25, 1, 21, 6, 26]);
    }

    #[test]
    fn full_region_measure_is_box_volume() {
        let g = Grid::cube(2, -1.0, 1.0, 9).unwrap();
        assert!((Region::full(&g).measure() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ball_region_measure_converges() {
        let g = Grid::cube(2, -1.0, 1.0, 65).unwrap();
        let r = Region::ball(&g, &Ball::new(vec![0.0, 0.0], 0.8).unwrap()).unwrap();
        let exact = std::f64::consts::PI * 0.64;
        assert!((r.measure() - exact).abs() / exact < 2e-3);
    }

    #[test]
    fn disjoint_ball_is_an_empty_region() {
        let g = Grid::cube(2, 0.0, 1.0, 5).unwrap();
        let far = Ball::new(vec![5.0, 5.0], 0.1).unwrap();
        assert!(matches!(Region::ball(&g, &far), Err(Error::EmptyRegion(_))));
        let a = CoefficientField::zero(&g);
        assert!(matches!(a.min_max_in_ball(&far), Err(Error::EmptyRegion(_))));
    }

    #[test]
    fn extents_must_be_commensurate() {
        assert!(Grid::from_extents(&[0.0, 0.0], &[1.0, 0.5], 5).is_ok());
        assert!(Grid::from_extents(&[0.0, 0.0], &[1.0, 0.3], 5).is_err());
    }

    #[test]
    fn interpolation_reproduces_affine_data() {
        let g = Grid::cube(2, 0.0, 1.0, 5).unwrap();
        let vals = (0..g.node_count())
            .map(|i| {
                let p = g.point(i);
                1.0 + p[0] + 2.0 * p[1]
            })
            .collect();
        let a = CoefficientField::from_values(&g, 1.0, vals).unwrap();
        let v = a.value_at(&[0.33, 0.71]);
        assert!((v - (1.0 + 0.33 + 1.42)).abs() < 1e-12);
    }

    #[test]
    fn seminorm_of_distance_to_hyperplane() {
        let g = Grid::cube(2, -1.0, 1.0, 17).unwrap();
        let a = CoefficientField::from_fn(&g, 0.5, |x| x[0].abs().sqrt()).unwrap();
        // The supremum of the quotient is 1, attained by pairs straddling {x1 = 0}
        // with one point on it.
        assert!((a.holder_seminorm() / SEMINORM_INFLATION - 1.0).abs() < 1e-12);
    }

    #[test]
    fn budgeted_seminorm_estimate_stays_below_exhaustive() {
        let g = Grid::cube(2, -1.0, 1.0, 21).unwrap();
        let vals: Vec<f64> = (0..g.node_count())
            .map(|i| {
                let p = g.point(i);
                (3.0 * p[0]).sin().abs() + p[1] * p[1]
            })
            .collect();
        let full = estimate_holder_quotient(&g, &vals, 0.7, usize::MAX);
        let cheap = estimate_holder_quotient(&g, &vals, 0.7, 5_000);
        assert!(cheap <= full + 1e-15);
        assert!(cheap > 0.8 * full);
    }

    #[test]
    fn constrained_field_rejects_off_sphere_values() {
        let g = Grid::cube(1, 0.0, 1.0, 3).unwrap();
        let f = GridField::constant(g.clone(), &[0.0, 2.0]).unwrap();
        assert!(matches!(f.into_constrained(1e-8), Err(Error::Constraint(_))));
        let f = GridField::constant(g, &[0.6, 0.8]).unwrap();
        assert!(f.into_constrained(1e-8).is_ok());
    }

    #[test]
    fn free_nodes_of_a_ball_lie_strictly_inside() {
        let g = Grid::cube(2, -1.0, 1.0, 11).unwrap();
        let ball = Ball::new(vec![0.0, 0.0], 0.6).unwrap();
        let region = Region::ball(&g, &ball).unwrap();
        let free = region.free_nodes();
        for (i, &f) in free.iter().enumerate() {
            if f {
                assert!(norm(&g.point(i)) < 0.6);
            }
        }
        assert!(free.iter().filter(|f| **f).count() > 0);
    }
}
