//! Musielak functions `Phi(x, t)`, the weighted Hausdorff measures built
//! from them by the Caratheodory construction, and relative capacities.

mod axioms;
mod capacity;
mod covering;
mod singular;
mod tents;

pub use axioms::{axiom_probe, AxiomCheck, AxiomReport, ControlCheck};
pub use capacity::{capacity_estimate, capacity_refinement, CapacityDomain, CapacityReport, CapacityTarget};
use covering::shaped_balls;
pub use covering::{
    best_covering, covering_cost, greedy_covering, hausdorff_comparison, hausdorff_estimate, hausdorff_sweep,
    radius_ladder, random_covering, structured_covering, ComparisonLevel, ComparisonReport, Covering, KappaSweep,
    PointCloudSet, SetDescriptor, SweepRow,
};
pub use singular::{singular_set_measures, SingularMeasureReport, SplitMeasures};
pub use tents::{verify_tent_trend, TentLevel, TentTrendReport};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::Exponents;
use crate::error::{Error, Result};
use crate::grid::{unit_ball_volume, Ball, CoefficientField};

/// Axis-aligned box standing in for the open set `Omega`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() || lower.iter().zip(&upper).any(|(a, b)| !(a < b)) {
            return Err(Error::Geometry("box needs lower < upper along every axis".into()));
        }
        Ok(BoxDomain { lower, upper })
    }

    pub fn cube(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        BoxDomain::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (a, b))| v > a && v < b)
    }

    /// Whether the closed ball lies in the box (faces allowed).
    pub fn contains_ball(&self, ball: &Ball) -> bool {
        let tol = 1e-12 * ball.radius;
        ball.center.len() == self.dim()
            && ball
                .center
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(c, (a, b))| c - ball.radius >= a - tol && c + ball.radius <= b + tol)
    }

    /// Distance from an interior point to the boundary of the box.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (a, b))| (v - a).min(b - v))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Constants with which a Musielak function claims to satisfy its axioms.
/// `None` means no claim.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeclaredConstants {
    /// Constant envelope `m` with `Phi(x, t) <= m t^n` for `t >= 1`.
    pub m_envelope: Option<f64>,
    pub beta3: Option<f64>,
    /// Constant of `Phi(x, s) / s <= C Phi(x, t) / t`.
    pub quasi_monotone: Option<f64>,
    pub c_g: Option<f64>,
    pub beta4: Option<f64>,
    pub c_d: Option<f64>,
}

/// A Caratheodory function `Phi: Omega x [0, inf) -> [0, inf)`, continuous
/// and non-decreasing in `t` with `Phi(x, 0) = 0`.
pub trait Musielak: Send + Sync {
    /// The open set `Omega`.
    fn domain(&self) -> &BoxDomain;

    fn eval(&self, x: &[f64], t: f64) -> f64;

    /// `d Phi / dt`. The default is a central difference.
    fn derivative(&self, x: &[f64], t: f64) -> f64 {
        let dt = 1e-6 * t.max(1e-3);
        let lo = (t - dt).max(0.0);
        (self.eval(x, t + dt) - self.eval(x, lo)) / (t + dt - lo)
    }

    /// True when `Phi` does not depend on `x`; lets ball costs skip quadrature.
    fn x_independent(&self) -> bool {
        false
    }

    /// Exponents `1 < p <= q` of the two-sided growth comparison.
    fn growth_exponents(&self) -> (f64, f64);

    fn declared(&self) -> DeclaredConstants {
        DeclaredConstants::default()
    }

    /// Points near which the axioms are hardest to satisfy, used to seed
    /// the small-ball part of the axiom probe.
    fn critical_points(&self) -> Vec<Vec<f64>> {
        Vec::new()
    }
}

/// `Phi(x, t) = t^p`.
#[derive(Clone, Debug)]
pub struct PowerPhi {
    p: f64,
    domain: BoxDomain,
}

impl PowerPhi {
    pub fn new(p: f64, domain: BoxDomain) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::Exponent(format!("power {p} must be positive")));
        }
        Ok(PowerPhi { p, domain })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

impl Musielak for PowerPhi {
    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn eval(&self, _x: &[f64], t: f64) -> f64 {
        t.powf(self.p)
    }

    fn derivative(&self, _x: &[f64], t: f64) -> f64 {
        if t == 0.0 {
            if self.p > 1.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.p * t.powf(self.p - 1.0)
        }
    }

    fn x_independent(&self) -> bool {
        true
    }

    fn growth_exponents(&self) -> (f64, f64) {
        (self.p, self.p)
    }

    fn declared(&self) -> DeclaredConstants {
        let n = self.domain.dim() as f64;
        DeclaredConstants {
            m_envelope: (self.p <= n).then_some(1.0),
            beta3: Some(0.5),
            quasi_monotone: (self.p >= 1.0).then_some(1.0),
            c_g: Some(1.0),
            beta4: Some(1.0),
            c_d: Some(1.0),
        }
    }
}

/// `Phi(x, t) = [t^p + a(x) t^q]^(1 + delta)` on the coefficient's lattice box.
#[derive(Clone, Debug)]
pub struct DoublePhasePhi {
    exponents: Exponents,
    coefficient: CoefficientField,
    delta: f64,
    domain: BoxDomain,
    a_max: f64,
}

impl DoublePhasePhi {
    pub fn new(exponents: Exponents, coefficient: CoefficientField, delta: f64) -> Result<Self> {
        exponents.validate_growth()?;
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::Exponent(format!("delta = {delta} must be non-negative")));
        }
        let grid = coefficient.grid();
        let domain = BoxDomain::new(grid.lower().to_vec(), grid.upper())?;
        let a_max = coefficient.values().iter().cloned().fold(0.0, f64::max);
        Ok(DoublePhasePhi { exponents, coefficient, delta, domain, a_max })
    }

    pub fn exponents(&self) -> &Exponents {
        &self.exponents
    }

    pub fn coefficient(&self) -> &CoefficientField {
        &self.coefficient
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Whether `q <= p + alpha`, the condition under which the comparison
    /// constant is finite.
    pub fn is_controlled(&self) -> bool {
        self.exponents.q <= self.exponents.p + self.coefficient.alpha() + 1e-12
    }
}

impl Musielak for DoublePhasePhi {
    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn eval(&self, x: &[f64], t: f64) -> f64 {
        let Exponents { p, q, .. } = self.exponents;
        (t.powf(p) + self.coefficient.value_at(x) * t.powf(q)).powf(1.0 + self.delta)
    }

    fn derivative(&self, x: &[f64], t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let Exponents { p, q, .. } = self.exponents;
        let a = self.coefficient.value_at(x);
        let h = t.powf(p) + a * t.powf(q);
        let dh = p * t.powf(p - 1.0) + q * a * t.powf(q - 1.0);
        (1.0 + self.delta) * h.powf(self.delta) * dh
    }

    fn x_independent(&self) -> bool {
        self.a_max == 0.0
    }

    fn growth_exponents(&self) -> (f64, f64) {
        let s = 1.0 + self.delta;
        (self.exponents.p * s, self.exponents.q * s)
    }

    fn declared(&self) -> DeclaredConstants {
        let s = 1.0 + self.delta;
        let n = self.domain.dim() as f64;
        let seminorm = self.coefficient.holder_seminorm();
        let alpha = self.coefficient.alpha();
        DeclaredConstants {
            m_envelope: (self.exponents.q * s <= n).then(|| (1.0 + self.a_max).powf(s)),
            beta3: Some((1.0 + self.a_max).powf(-1.0 / self.exponents.p).min(0.5)),
            quasi_monotone: Some(1.0),
            c_g: Some(1.0),
            beta4: Some(1.0),
            // a_sup - a_inf <= [a] (2r)^alpha and t^(q-p) <= r^(p-q) on the
            // range 1 <= t <= 1/r give the bound below when q - p <= alpha.
            c_d: self.is_controlled().then(|| (1.0 + seminorm * 2f64.powf(alpha)).powf(s)),
        }
    }

    fn critical_points(&self) -> Vec<Vec<f64>> {
        let values = self.coefficient.values();
        let grid = self.coefficient.grid();
        let mut order: Vec<usize> = (0..values.len()).filter(|&i| !grid.is_boundary_node(i)).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
        let step = (order.len() / 16).max(1);
        order.iter().step_by(step).take(16).map(|&i| grid.point(i)).collect()
    }
}

type PhiFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// A Musielak function given by a closure.
#[derive(Clone)]
pub struct FnPhi {
    f: PhiFn,
    domain: BoxDomain,
    growth: (f64, f64),
    declared: DeclaredConstants,
    critical: Vec<Vec<f64>>,
}

impl std::fmt::Debug for FnPhi {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnPhi").field("domain", &self.domain).field("growth", &self.growth).finish_non_exhaustive()
    }
}

impl FnPhi {
    pub fn new(domain: BoxDomain, growth: (f64, f64), f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        FnPhi { f: Arc::new(f), domain, growth, declared: DeclaredConstants::default(), critical: Vec::new() }
    }

    pub fn with_declared(mut self, declared: DeclaredConstants) -> Self {
        self.declared = declared;
        self
    }

    pub fn with_critical_points(mut self, points: Vec<Vec<f64>>) -> Self {
        self.critical = points;
        self
    }
}

impl Musielak for FnPhi {
    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn eval(&self, x: &[f64], t: f64) -> f64 {
        (self.f)(x, t)
    }

    fn growth_exponents(&self) -> (f64, f64) {
        self.growth
    }

    fn declared(&self) -> DeclaredConstants {
        self.declared.clone()
    }

    fn critical_points(&self) -> Vec<Vec<f64>> {
        self.critical.clone()
    }
}

/// Which ball cost of the Caratheodory construction to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostVariant {
    /// `int_B Phi(x, 1/r) dx`.
    #[default]
    Integral,
    /// `|B| sup_B Phi(x, 1/r)`.
    Plus,
    /// `|B| inf_B Phi(x, 1/r)`.
    Minus,
}

impl CostVariant {
    pub const ALL: [CostVariant; 3] = [CostVariant::Minus, CostVariant::Integral, CostVariant::Plus];
}

/// Sample points per ball diameter of the quadrature lattice.
fn samples_per_diameter(n: usize) -> usize {
    match n {
        1 => 32,
        2 => 12,
        _ => 8,
    }
}

/// Centers of the cells of a local lattice on the ball's bounding cube that
/// fall inside the closed ball. These serve both as quadrature nodes (unit
/// cell weights) and as the sample set for sup and inf.
pub fn ball_samples(ball: &Ball) -> Vec<Vec<f64>> {
    ball_lattice(ball, samples_per_diameter(ball.dim()))
}

/// Cell centers inside the closed ball of a lattice with `m` cells per diameter.
pub(crate) fn ball_lattice(ball: &Ball, m: usize) -> Vec<Vec<f64>> {
    let n = ball.dim();
    let h = 2.0 * ball.radius / m as f64;
    let r2 = ball.radius * ball.radius;
    let mut out = Vec::new();
    let mut digits = vec![0usize; n];
    for k in 0..m.pow(n as u32) {
        let mut rest = k;
        for d in digits.iter_mut() {
            *d = rest % m;
            rest /= m;
        }
        let x: Vec<f64> = (0..n).map(|a| ball.center[a] - ball.radius + h * (digits[a] as f64 + 0.5)).collect();
        let d2: f64 = x.iter().zip(&ball.center).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 <= r2 {
            out.push(x);
        }
    }
    out
}

/// The three ball costs `(minus, integral, plus)` on shared samples, so that
/// `minus <= integral <= plus` holds exactly.
pub fn h_phi_all(phi: &dyn Musielak, ball: &Ball) -> Result<(f64, f64, f64)> {
    if !(ball.radius > 0.0 && ball.radius.is_finite()) {
        return Err(Error::EmptyRegion(format!("ball of radius {} is empty", ball.radius)));
    }
    if ball.dim() != phi.domain().dim() {
        return Err(Error::Shape("ball and domain dimensions differ".into()));
    }
    if !phi.domain().contains_ball(ball) {
        return Err(Error::Geometry(format!("ball of radius {} at {:?} leaves the domain", ball.radius, ball.center)));
    }
    let volume = unit_ball_volume(ball.dim()) * ball.radius.powi(ball.dim() as i32);
    let t = 1.0 / ball.radius;
    if phi.x_independent() {
        let c = volume * phi.eval(&ball.center, t);
        return Ok((c, c, c));
    }
    let samples = ball_samples(ball);
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for x in &samples {
        let v = phi.eval(x, t);
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
    }
    let mean = (sum / samples.len() as f64).clamp(lo, hi);
    Ok((volume * lo, volume * mean, volume * hi))
}

/// Ball cost `h_Phi(B)` or one of its frozen variants `h_Phi^+-(B)`.
pub fn h_phi(phi: &dyn Musielak, ball: &Ball, variant: CostVariant) -> Result<f64> {
    let (minus, integral, plus) = h_phi_all(phi, ball)?;
    Ok(match variant {
        CostVariant::Minus => minus,
        CostVariant::Integral => integral,
        CostVariant::Plus => plus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn square() -> BoxDomain {
        BoxDomain::cube(2, -1.0, 1.0).unwrap()
    }

    #[test]
    fn ball_costs_of_power_functions() {
        let ball = Ball::new(vec![0.1, -0.2], 0.3).unwrap();
        let phi = PowerPhi::new(1.5, square()).unwrap();
        let expected = std::f64::consts::PI * 0.3f64.powf(0.5);
        assert!((h_phi(&phi, &ball, CostVariant::Integral).unwrap() - expected).abs() < 1e-12);
        let scale_free = PowerPhi::new(2.0, square()).unwrap();
        for r in [0.01, 0.2, 0.7] {
            let b = Ball::new(vec![0.0, 0.0], r).unwrap();
            assert!((h_phi(&scale_free, &b, CostVariant::Plus).unwrap() - std::f64::consts::PI).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_phi_costs_the_ball_volume() {
        let phi = FnPhi::new(square(), (1.0, 1.0), |_, _| 2.5);
        let ball = Ball::new(vec![0.0, 0.0], 0.4).unwrap();
        let (lo, mid, hi) = h_phi_all(&phi, &ball).unwrap();
        let v = 2.5 * std::f64::consts::PI * 0.16;
        assert!((lo - v).abs() < 1e-12 && (mid - v).abs() < 1e-12 && (hi - v).abs() < 1e-12);
    }

    #[test]
    fn ball_cost_errors() {
        let phi = PowerPhi::new(1.0, square()).unwrap();
        let empty = Ball { center: vec![0.0, 0.0], radius: 0.0 };
        assert!(matches!(h_phi(&phi, &empty, CostVariant::Integral), Err(Error::EmptyRegion(_))));
        let outside = Ball::new(vec![0.9, 0.0], 0.2).unwrap();
        assert!(matches!(h_phi(&phi, &outside, CostVariant::Integral), Err(Error::Geometry(_))));
    }

    #[test]
    fn variant_chain_for_a_modulated_phi() {
        let g = Grid::cube(2, -1.0, 1.0, 33).unwrap();
        let a = CoefficientField::from_fn(&g, 0.5, |x| x[0].abs().sqrt()).unwrap();
        let phi = DoublePhasePhi::new(Exponents::new(2.0, 2.4, 0.5).unwrap(), a, 0.1).unwrap();
        let ball = Ball::new(vec![0.05, 0.3], 0.2).unwrap();
        let (lo, mid, hi) = h_phi_all(&phi, &ball).unwrap();
        assert!(lo < mid && mid < hi);
        let d = phi.declared();
        assert!(hi <= d.c_d.unwrap() * lo);
    }
}
