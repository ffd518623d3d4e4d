//! Ratios of the two sides of the energy inequalities satisfied by
//! minimizers. All integrals use the cell quadrature of the energy, sampling
//! node quantities at the cell anchors.

use serde::{Deserialize, Serialize};

use super::ball_region;
use crate::energy::{h_cell_values, h_energy, h_integral, DensityProfile};
use crate::error::{Error, Result};
use crate::grid::{norm, Ball, GridField, Region};
use crate::solver::{minimize_frozen_dirichlet, FrozenProblem, SolveOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaccioppoliVariant {
    /// `int_{B_r} H(Du) <= c int_{B_R} H((u - (u)_R) / (R - r))`.
    General,
    /// `int_{B_{R/2}} H(Du) <= c int_{B_R} H^-_{B_R}((u - (u)_R) / R)`.
    Half,
    /// `int_{B_{R/2}} H(Du) <= c int_{B_R} |(u - (u)_R) / R|^p`, valid when
    /// `inf_{B_R} a <= 4 [a] R^alpha`.
    SmallA,
}

fn ratio(num: f64, den: f64) -> Result<f64> {
    match (num == 0.0, den == 0.0) {
        (true, _) => Ok(0.0),
        (false, true) => Err(Error::Internal(format!("numerator {num} over a vanishing denominator"))),
        (false, false) => Ok(num / den),
    }
}

/// Arithmetic mean of the field over the nodes of the closed ball.
fn node_mean(field: &GridField, ball: &Ball) -> Result<Vec<f64>> {
    let nodes = field.grid().nodes_in_ball(ball);
    if nodes.is_empty() {
        return Err(Error::EmptyRegion("ball holds no lattice node".into()));
    }
    let mut mean = vec![0.0; field.components()];
    for &i in &nodes {
        mean.iter_mut().zip(field.node(i)).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= nodes.len() as f64);
    Ok(mean)
}

/// `sum w h^n f(anchor)` over the region.
fn quadrature(region: &Region, f: impl Fn(usize) -> f64) -> f64 {
    let sum: f64 = region.cells().iter().zip(region.weights()).map(|(&i, &w)| w * f(i)).sum();
    sum * region.grid().cell_volume()
}

fn oscillation(field: &GridField, node: usize, mean: &[f64]) -> f64 {
    let d: Vec<f64> = field.node(node).iter().zip(mean).map(|(a, b)| a - b).collect();
    norm(&d)
}

/// LHS / RHS of the selected Caccioppoli inequality on balls about
/// `center`. The half-ball variants use `R/2` on the left and ignore `r`.
/// Both sides zero gives 0.
pub fn caccioppoli_ratio(
    density: &DensityProfile,
    field: &GridField,
    center: &[f64],
    r: f64,
    big_r: f64,
    variant: CaccioppoliVariant,
) -> Result<f64> {
    if !(r > 0.0 && r < big_r && big_r <= 1.0) {
        return Err(Error::Options(format!("radii must satisfy 0 < r < R <= 1, got r = {r}, R = {big_r}")));
    }
    let grid = field.grid();
    let outer_ball = Ball::new(center.to_vec(), big_r)?;
    let outer = ball_region(grid, &outer_ball)?;
    let coef = density.coefficient();
    let exps = density.exponents();
    let a_inf = coef.min_max_in_ball(&outer_ball)?.0;
    if variant == CaccioppoliVariant::SmallA {
        let bound = 4.0 * coef.holder_seminorm() * big_r.powf(exps.alpha);
        if a_inf > bound {
            return Err(Error::Variant(format!(
                "inf a = {a_inf} exceeds 4 [a] R^alpha = {bound}; the small-coefficient form does not apply"
            )));
        }
    }
    let inner_radius = if variant == CaccioppoliVariant::General { r } else { big_r / 2.0 };
    let inner = ball_region(grid, &outer_ball.with_radius(inner_radius)?)?;
    let lhs = h_integral(density, field, &inner, |v| v)?;
    let mean = node_mean(field, &outer_ball)?;
    let rhs = match variant {
        CaccioppoliVariant::General => {
            quadrature(&outer, |i| density.h_radial(coef.value(i), oscillation(field, i, &mean) / (big_r - r)))
        }
        CaccioppoliVariant::Half => {
            quadrature(&outer, |i| density.h_radial(a_inf, oscillation(field, i, &mean) / big_r))
        }
        CaccioppoliVariant::SmallA => quadrature(&outer, |i| (oscillation(field, i, &mean) / big_r).powf(exps.p)),
    };
    ratio(lhs, rhs)
}

/// `mean_B H(x, (u - (u)_B) / r)` over `(mean_B H(x, Du)^d)^(1/d)`.
pub fn poincare_ratio(density: &DensityProfile, field: &GridField, ball: &Ball, d_exponent: f64) -> Result<f64> {
    if !(d_exponent > 0.0 && d_exponent < 1.0) {
        return Err(Error::Options(format!("exponent d = {d_exponent} must lie in (0, 1)")));
    }
    if ball.radius > 1.0 {
        return Err(Error::Options(format!("radius {} exceeds 1", ball.radius)));
    }
    if field.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("field is not bounded".into()));
    }
    let region = ball_region(field.grid(), ball)?;
    let measure = region.measure();
    let mean = node_mean(field, ball)?;
    let coef = density.coefficient();
    let num =
        quadrature(&region, |i| density.h_radial(coef.value(i), oscillation(field, i, &mean) / ball.radius)) / measure;
    let den = (h_integral(density, field, &region, |v| v.powf(d_exponent))? / measure).powf(1.0 / d_exponent);
    ratio(num, den)
}

/// Cell values of `H(x, Du)` on a ball and its double, kept so that many
/// exponents can be examined without recomputing gradients.
struct ReverseHolder {
    weights: Vec<f64>,
    values: Vec<f64>,
    doubled_mean: f64,
}

impl ReverseHolder {
    fn new(density: &DensityProfile, field: &GridField, ball: &Ball) -> Result<Self> {
        if ball.radius > 1.0 {
            return Err(Error::Options(format!("radius {} exceeds 1", ball.radius)));
        }
        let grid = field.grid();
        let doubled = ball_region(grid, &ball.with_radius(2.0 * ball.radius)?)?;
        let region = ball_region(grid, ball)?;
        let doubled_mean = h_energy(density, field, &doubled)? / doubled.measure();
        let values = h_cell_values(density, field, &region)?;
        Ok(ReverseHolder { weights: region.weights().to_vec(), values, doubled_mean })
    }

    fn ratio(&self, delta: f64) -> Result<f64> {
        let power = 1.0 + delta;
        let sum: f64 = self.weights.iter().zip(&self.values).map(|(w, v)| w * v.powf(power)).sum();
        let mean = sum / self.weights.iter().sum::<f64>();
        ratio(mean.powf(1.0 / power), self.doubled_mean)
    }
}

/// `(mean_{B_R} H^(1+delta))^(1/(1+delta))` over `mean_{B_2R} H`.
pub fn higher_integrability_ratio(density: &DensityProfile, field: &GridField, ball: &Ball, delta: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(Error::Options(format!("delta = {delta} must be non-negative")));
    }
    ReverseHolder::new(density, field, ball)?.ratio(delta)
}

/// Largest multiple of `step` up to `max` such that the reverse-Holder
/// ratio stays within `cap` for it and every smaller multiple; 0 when the
/// first step already fails.
pub fn delta_g_scan(
    density: &DensityProfile,
    field: &GridField,
    ball: &Ball,
    cap: f64,
    step: f64,
    max: f64,
) -> Result<f64> {
    let probe = ReverseHolder::new(density, field, ball)?;
    let mut best = 0.0;
    let steps = (max / step + 1e-9).floor() as usize;
    for k in 1..=steps {
        let delta = k as f64 * step;
        if probe.ratio(delta)? > cap {
            break;
        }
        best = delta;
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaScan {
    /// Largest accepted exponent, 0 if none.
    pub sigma: f64,
    /// `(sigma, ratio)` for every exponent examined.
    pub ratios: Vec<(f64, f64)>,
}

/// Boundary higher integrability: the frozen solution `v` on the ball with
/// boundary values `u`, frozen at the mean of `u`, compared through
/// `(mean H(Dv)^(1+s))^(1/(1+s)) / (mean H(Du)^(1+s))^(1/(1+s))`. Exponents
/// are multiples of `step` strictly below `limit`.
pub fn sigma_g_scan(
    density: &DensityProfile,
    field: &GridField,
    ball: &Ball,
    cap: f64,
    step: f64,
    limit: f64,
    opts: &SolveOptions,
) -> Result<SigmaScan> {
    let grid = field.grid();
    let region = ball_region(grid, ball)?;
    let mean = node_mean(field, ball)?;
    let problem =
        FrozenProblem { ball: ball.clone(), boundary_values: field.clone(), frozen_point_v: mean, constrained: false };
    let (solution, _) = minimize_frozen_dirichlet(density, &problem, opts)?;
    let measure = region.measure();
    let mut out = SigmaScan { sigma: 0.0, ratios: Vec::new() };
    let mut k = 1;
    loop {
        let sigma = k as f64 * step;
        if sigma >= limit - 1e-12 {
            break;
        }
        let power = 1.0 + sigma;
        let lp = |f: &GridField| -> Result<f64> {
            Ok((h_integral(density, f, &region, |v| v.powf(power))? / measure).powf(1.0 / power))
        };
        let r = ratio(lp(&solution)?, lp(field)?)?;
        out.ratios.push((sigma, r));
        if r > cap {
            break;
        }
        out.sigma = sigma;
        k += 1;
    }
    Ok(out)
}
