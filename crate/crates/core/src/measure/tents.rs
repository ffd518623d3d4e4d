//! Capacity upper bounds from nested tent-function coverings of a set of
//! finite measure. Averaging `J` tents with weights `1/k` divides the energy
//! by roughly `S_J^p` with `S_J = 1 + 1/2 + ... + 1/J`, so the bounds tend
//! to zero as the number of levels grows.

use serde::{Deserialize, Serialize};

use super::{axiom_probe, ball_lattice, greedy_covering, shaped_balls, CostVariant, Musielak, PointCloudSet};
use crate::error::{Error, Result};
use crate::grid::{unit_ball_volume, Ball};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TentLevel {
    /// Bound on the tent supports of this level. The covering uses radius
    /// `kappa / 4`; each tent equals 1 on the doubled covering ball.
    pub kappa: f64,
    pub balls: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    /// `int Phi(x, |D f_k|)` of the unscaled tent function.
    pub tent_energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TentTrendReport {
    pub levels: Vec<TentLevel>,
    /// Energy of the averaged function `g_j` for `j = 1..=levels`.
    pub bounds: Vec<f64>,
    /// `bounds[j + 1] / bounds[j]`.
    pub decay_factors: Vec<f64>,
    pub required_decrease: f64,
    pub passed: bool,
}

/// First radius scale of the nested neighbourhoods.
const RHO0: f64 = 0.5;
const PROBE_BUDGET: usize = 200;

fn tent_samples_per_diameter(n: usize) -> usize {
    match n {
        1 => 256,
        2 => 48,
        _ => 24,
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Tent `f_j = 1` on `B_r`, `2 - |x - x_j| / r` on the annulus, 0 beyond `2r`.
fn tent(ball: &Ball, x: &[f64]) -> f64 {
    (2.0 - dist(&ball.center, x) / ball.radius).clamp(0.0, 1.0)
}

/// `int Phi(x, scale |D f|)` for `f = max_j f_j`; the gradient at `x` is
/// that of the tent attaining the maximum (lowest index on ties).
fn tent_integral(phi: &dyn Musielak, balls: &[Ball], scale: f64) -> Result<f64> {
    let n = phi.domain().dim();
    let m = tent_samples_per_diameter(n);
    let mut total = 0.0;
    for (j, ball) in balls.iter().enumerate() {
        let outer = ball.with_radius(2.0 * ball.radius)?;
        if !phi.domain().contains_ball(&outer) {
            return Err(Error::Geometry("a tent support leaves the domain".into()));
        }
        let samples = ball_lattice(&outer, m);
        let slope = scale / ball.radius;
        let mut sum = 0.0;
        for x in &samples {
            let fj = tent(ball, x);
            if !(fj > 0.0 && fj < 1.0) {
                continue;
            }
            let owner = balls.iter().enumerate().all(|(i, b)| {
                let fi = tent(b, x);
                if i < j {
                    fi < fj
                } else {
                    fi <= fj
                }
            });
            if owner {
                sum += phi.eval(x, slope);
            }
        }
        total += unit_ball_volume(n) * outer.radius.powi(n as i32) * sum / samples.len() as f64;
    }
    Ok(total)
}

/// Builds nested neighbourhoods `V_1 > V_2 > ...` of `set` from coverings
/// by balls centered on it, forms the tent functions of each level and the averaged functions
/// `g_j = S_j^{-1} sum_{k <= j} f_k / k`, and reports their energies. The
/// gradients of different levels have disjoint supports, so the energy of
/// `g_j` is the sum of the scaled level energies.
///
/// Passes when every level lowers the bound by at least `required_decrease`
/// (a fraction in `(0, 1)`).
pub fn verify_tent_trend(
    phi: &dyn Musielak,
    set: &PointCloudSet,
    levels: usize,
    required_decrease: f64,
    seed: u64,
) -> Result<TentTrendReport> {
    if levels < 2 {
        return Err(Error::Options("the trend needs at least two levels".into()));
    }
    if !(required_decrease > 0.0 && required_decrease < 1.0) {
        return Err(Error::Options(format!("required decrease {required_decrease} must lie in (0, 1)")));
    }
    if set.is_empty() {
        return Err(Error::EmptyRegion("the set to be covered is empty".into()));
    }
    set.check_inside(phi.domain())?;
    let (p, _) = phi.growth_exponents();
    if !(p > 1.0) {
        return Err(Error::Scope(format!("lower growth exponent {p} must exceed 1")));
    }
    let probe = axiom_probe(phi, PROBE_BUDGET, seed)?;
    if !probe.controllo.passed || !probe.c_g.passed {
        return Err(Error::Axiom(format!(
            "comparison constant {} (trend {:.3}), growth constant {}",
            probe.controllo.observed, probe.controllo.trend_slope, probe.c_g.observed
        )));
    }

    let slack = set.resolution / 2.0;
    let clearance = set.points.iter().map(|p| phi.domain().boundary_distance(p)).fold(f64::INFINITY, f64::min) - slack;
    let mut kappa = RHO0.min(clearance) / 4.0;
    let mut out = Vec::with_capacity(levels);
    let mut coverings: Vec<Vec<Ball>> = Vec::with_capacity(levels);
    for _ in 0..levels {
        if !(kappa > 2.0 * set.resolution) {
            return Err(Error::Resolution(format!("level radius {kappa} no longer resolves the set")));
        }
        // Doubling the covering balls keeps the set at depth at least the
        // smallest covering radius inside their union. Known shapes are laid
        // out with equal balls of the full radius so that the depth does not
        // collapse from level to level.
        let covering = match shaped_balls(set, kappa / 4.0) {
            Some(balls) => balls,
            None => greedy_covering(phi, set, kappa / 4.0, CostVariant::Integral, true)?.0.balls,
        };
        let balls: Vec<Ball> = covering.iter().map(|b| b.with_radius(2.0 * b.radius)).collect::<Result<_>>()?;
        let tent_energy = tent_integral(phi, &balls, 1.0)?;
        let (radius_min, radius_max) =
            balls.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), b| (lo.min(b.radius), hi.max(b.radius)));
        out.push(TentLevel { kappa, balls: balls.len(), radius_min, radius_max, tent_energy });
        // Depth of the set inside V_{k+1} = union of the level's balls.
        let depth = set
            .points
            .iter()
            .map(|e| balls.iter().map(|b| b.radius - dist(&b.center, e)).fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min)
            - slack;
        coverings.push(balls);
        // Half the depth keeps the next supports well inside V_{k+1}.
        kappa = depth.min(1.0) / 2.0;
    }

    let mut bounds = Vec::with_capacity(levels);
    for j in 1..=levels {
        let s: f64 = (1..=j).map(|k| 1.0 / k as f64).sum();
        let mut bound = 0.0;
        for (k, balls) in coverings.iter().take(j).enumerate() {
            bound += tent_integral(phi, balls, 1.0 / ((k + 1) as f64 * s))?;
        }
        bounds.push(bound);
    }
    let decay_factors: Vec<f64> = bounds.windows(2).map(|w| w[1] / w[0]).collect();
    let passed = decay_factors.iter().all(|f| *f <= 1.0 - required_decrease);
    Ok(TentTrendReport { levels: out, bounds, decay_factors, required_decrease, passed })
}
