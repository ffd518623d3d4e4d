//! Partial-regularity diagnostics: intrinsic excess, the epsilon-regularity
//! test and singular-point indicator, phase labels, and ratio probes for the
//! Caccioppoli, Poincare, reverse-Holder and Morrey-decay inequalities.

mod morrey;
mod phase;
mod probes;

pub use morrey::{morrey_decay_fit, MorreyFit};
pub use phase::{phase_classify, Phase, PhaseLabel};
pub use probes::{
    caccioppoli_ratio, delta_g_scan, higher_integrability_ratio, poincare_ratio, sigma_g_scan, CaccioppoliVariant,
    SigmaScan,
};

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{h_energy, DensityProfile, Side};
use crate::error::{Error, Result};
use crate::grid::{Ball, Grid, GridField, Region};
use crate::solver::SolveOptions;

/// Radii spanning fewer lattice cells than this are not resolved.
pub const MIN_RADIUS_CELLS: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Regular,
    Singular,
    Inconclusive,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Regular => "regular",
            Classification::Singular => "singular",
            Classification::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularityOptions {
    /// Smallness parameter of the classification.
    pub epsilon: f64,
    /// Additional values of epsilon reported in every sweep.
    pub epsilon_sweep: Vec<f64>,
    /// Quotients staying at or above this on every radius mark a point singular.
    pub floor: f64,
    /// Largest reverse-Holder ratio accepted by the integrability probes.
    pub integrability_cap: f64,
    pub exponent_step: f64,
    pub exponent_max: f64,
    /// Whether to solve a frozen problem per point for the boundary
    /// integrability probe.
    pub sigma_probe: bool,
    pub solve: SolveOptions,
}

impl Default for RegularityOptions {
    fn default() -> Self {
        RegularityOptions {
            epsilon: 0.1,
            epsilon_sweep: vec![0.01, 0.03, 0.1, 0.3, 1.0, 2.0],
            floor: 1.0,
            integrability_cap: 10.0,
            exponent_step: 0.02,
            exponent_max: 1.0,
            sigma_probe: false,
            solve: SolveOptions::default(),
        }
    }
}

impl RegularityOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Options(msg));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) || self.epsilon_sweep.iter().any(|e| !(*e > 0.0)) {
            return bad("epsilon values must be positive".into());
        }
        if !(self.floor >= 1.0) {
            return bad(format!("floor {} must be at least 1", self.floor));
        }
        if !(self.integrability_cap > 1.0) {
            return bad(format!("integrability cap {} must exceed 1", self.integrability_cap));
        }
        if !(self.exponent_step > 0.0 && self.exponent_step <= self.exponent_max) {
            return bad("exponent scan needs 0 < step <= max".into());
        }
        self.solve.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonOutcome {
    pub epsilon: f64,
    pub regular: bool,
    /// Largest radius at which the smallness condition holds.
    pub radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub point: Vec<f64>,
    /// Resolved radii, strictly decreasing.
    pub radii: Vec<f64>,
    /// Requested radii left out as unresolved or not fitting the lattice.
    pub excluded_radii: Vec<f64>,
    pub excess_values: Vec<f64>,
    /// `excess / H^-(1/rho)` per radius.
    pub intrinsic_quotients: Vec<f64>,
    pub classification: Classification,
    pub epsilon_used: f64,
    pub floor: f64,
    /// Largest quotient over the three smallest radii; absent when no
    /// radius was resolved.
    pub limsup_estimate: Option<f64>,
    pub epsilon_sweep: Vec<EpsilonOutcome>,
    pub delta_g_probe: Option<f64>,
    pub sigma_g_probe: Option<f64>,
}

fn ball_region(grid: &Grid, ball: &Ball) -> Result<Region> {
    if !grid.contains_ball(ball) {
        return Err(Error::Geometry(format!(
            "ball of radius {} at {:?} leaves the lattice box",
            ball.radius, ball.center
        )));
    }
    Region::ball(grid, ball)
}

/// Mean of `H(x, Du)` over the ball.
pub fn excess(density: &DensityProfile, field: &GridField, ball: &Ball) -> Result<f64> {
    let region = ball_region(field.grid(), ball)?;
    Ok(h_energy(density, field, &region)? / region.measure())
}

/// `excess / H^-_B(1 / rho)`.
pub fn intrinsic_quotient(density: &DensityProfile, ball: &Ball, excess: f64) -> Result<f64> {
    Ok(excess / density.eval_h_frozen(ball, 1.0 / ball.radius, Side::Minus)?)
}

fn smallness_holds(density: &DensityProfile, ball: &Ball, excess: f64, epsilon: f64) -> Result<bool> {
    Ok(excess < density.eval_h_frozen(ball, epsilon / ball.radius, Side::Minus)?)
}

/// Whether the excess on the ball is below `H^-_B(epsilon / r)`.
pub fn epsilon_regularity_test(density: &DensityProfile, field: &GridField, ball: &Ball, epsilon: f64) -> Result<bool> {
    if ball.radius > 1.0 {
        return Err(Error::Options(format!("test radius {} exceeds 1", ball.radius)));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Options(format!("epsilon {epsilon} must be positive")));
    }
    let e = excess(density, field, ball)?;
    smallness_holds(density, ball, e, epsilon)
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::Options("radii must be a non-empty list of positive numbers".into()));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Options("radii must be strictly decreasing".into()));
    }
    Ok(())
}

/// Sweeps the concentric balls about `point`, computing the excess and the
/// intrinsic quotient on every resolved radius. The point is regular when
/// the smallness condition holds on some ball of radius at most 1, singular
/// when every quotient stays at or above the floor, and inconclusive
/// otherwise.
pub fn singular_indicator(
    density: &DensityProfile,
    field: &GridField,
    point: &[f64],
    radii: &[f64],
    opts: &RegularityOptions,
) -> Result<RegularityReport> {
    opts.validate()?;
    check_radii(radii)?;
    let grid = field.grid();
    let min_radius = MIN_RADIUS_CELLS * grid.spacing();
    let (usable, excluded): (Vec<f64>, Vec<f64>) = radii.iter().partition(|&&r| r >= min_radius * (1.0 - 1e-12));
    if usable.is_empty() {
        return Err(Error::Resolution(format!(
            "no radius reaches {MIN_RADIUS_CELLS} cells of size {}",
            grid.spacing()
        )));
    }
    let balls: Vec<Ball> = usable.iter().map(|&r| Ball::new(point.to_vec(), r)).collect::<Result<_>>()?;
    let mut excess_values = Vec::with_capacity(balls.len());
    let mut quotients = Vec::with_capacity(balls.len());
    for ball in &balls {
        let e = excess(density, field, ball)?;
        quotients.push(intrinsic_quotient(density, ball, e)?);
        excess_values.push(e);
    }

    let sweep_for = |epsilon: f64| -> Result<EpsilonOutcome> {
        let mut radius = None;
        for (ball, &e) in balls.iter().zip(&excess_values) {
            if ball.radius <= 1.0 && smallness_holds(density, ball, e, epsilon)? {
                radius = Some(ball.radius);
                break;
            }
        }
        Ok(EpsilonOutcome { epsilon, regular: radius.is_some(), radius })
    };
    let mut epsilons = opts.epsilon_sweep.clone();
    if !epsilons.contains(&opts.epsilon) {
        epsilons.push(opts.epsilon);
    }
    epsilons.sort_by(f64::total_cmp);
    let epsilon_sweep: Vec<EpsilonOutcome> = epsilons.iter().map(|&e| sweep_for(e)).collect::<Result<_>>()?;
    let regular = epsilon_sweep.iter().find(|o| o.epsilon == opts.epsilon).is_some_and(|o| o.regular);
    let classification = if regular {
        Classification::Regular
    } else if quotients.iter().all(|q| *q >= opts.floor) {
        Classification::Singular
    } else {
        Classification::Inconclusive
    };
    let tail = quotients.len().saturating_sub(3);
    let limsup_estimate = quotients[tail..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    // Integrability probes on the largest radius whose double fits.
    let probe_ball = balls
        .iter()
        .find(|b| b.radius <= 1.0 && grid.contains_ball(&b.with_radius(2.0 * b.radius).expect("positive radius")));
    let delta_g_probe = match probe_ball {
        Some(b) => {
            Some(delta_g_scan(density, field, b, opts.integrability_cap, opts.exponent_step, opts.exponent_max)?)
        }
        None => None,
    };
    let sigma_g_probe = match (opts.sigma_probe, balls.first()) {
        (true, Some(b)) => {
            let limit = delta_g_probe.unwrap_or(opts.exponent_max);
            Some(sigma_g_scan(density, field, b, opts.integrability_cap, opts.exponent_step, limit, &opts.solve)?.sigma)
        }
        _ => None,
    };

    Ok(RegularityReport {
        point: point.to_vec(),
        radii: usable,
        excluded_radii: excluded,
        excess_values,
        intrinsic_quotients: quotients,
        classification,
        epsilon_used: opts.epsilon,
        floor: opts.floor,
        limsup_estimate: Some(limsup_estimate),
        epsilon_sweep,
        delta_g_probe,
        sigma_g_probe,
    })
}

fn inconclusive(point: &[f64], radii: &[f64], opts: &RegularityOptions) -> RegularityReport {
    RegularityReport {
        point: point.to_vec(),
        radii: Vec::new(),
        excluded_radii: radii.to_vec(),
        excess_values: Vec::new(),
        intrinsic_quotients: Vec::new(),
        classification: Classification::Inconclusive,
        epsilon_used: opts.epsilon,
        floor: opts.floor,
        limsup_estimate: None,
        epsilon_sweep: Vec::new(),
        delta_g_probe: None,
        sigma_g_probe: None,
    }
}

/// [`singular_indicator`] at every probe point, in parallel. Per point,
/// radii whose balls leave the lattice are dropped; a point left without a
/// resolved radius is reported inconclusive.
pub fn classify_grid(
    density: &DensityProfile,
    field: &GridField,
    probe_points: &[Vec<f64>],
    radii: &[f64],
    opts: &RegularityOptions,
) -> Result<Vec<RegularityReport>> {
    opts.validate()?;
    check_radii(radii)?;
    let grid = field.grid();
    let min_radius = MIN_RADIUS_CELLS * grid.spacing();
    probe_points
        .par_iter()
        .map(|point| {
            if point.len() != grid.dim() {
                return Err(Error::Shape("probe point has the wrong dimension".into()));
            }
            let fitting: Vec<f64> = radii
                .iter()
                .copied()
                .filter(|&r| grid.contains_ball(&Ball { center: point.clone(), radius: r }))
                .collect();
            if !fitting.iter().any(|&r| r >= min_radius * (1.0 - 1e-12)) {
                return Ok(inconclusive(point, radii, opts));
            }
            let mut report = singular_indicator(density, field, point, &fitting, opts)?;
            report.excluded_radii.extend(radii.iter().filter(|r| !fitting.contains(r)).copied());
            report.excluded_radii.sort_by(|a, b| b.total_cmp(a));
            Ok(report)
        })
        .collect()
}

/// Centers of the `per_axis^n` congruent sub-boxes of the lattice box.
pub fn probe_lattice(grid: &Grid, per_axis: usize) -> Vec<Vec<f64>> {
    let n = grid.dim();
    let (lower, upper) = (grid.lower(), grid.upper());
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut k| {
            let mut digits = vec![0usize; n];
            for d in digits.iter_mut().rev() {
                *d = k % per_axis;
                k /= per_axis;
            }
            (0..n).map(|a| lower[a] + (upper[a] - lower[a]) * (digits[a] as f64 + 0.5) / per_axis as f64).collect()
        })
        .collect()
}

/// One CSV row per point and resolved radius:
/// `x0, .., rho, excess, quotient, classification`. Points without a resolved
/// radius get a single row with empty numeric cells.
pub fn reports_csv(reports: &[RegularityReport]) -> String {
    let n = reports.first().map_or(0, |r| r.point.len());
    let mut out = String::new();
    for k in 0..n {
        let _ = write!(out, "x{k},");
    }
    out.push_str("rho,excess,quotient,classification\n");
    for r in reports {
        let coords: String = r.point.iter().map(|x| format!("{x},")).collect();
        if r.radii.is_empty() {
            let _ = writeln!(out, "{coords},,,{}", r.classification.as_str());
        }
        for ((rho, e), q) in r.radii.iter().zip(&r.excess_values).zip(&r.intrinsic_quotients) {
            let _ = writeln!(out, "{coords}{rho},{e},{q},{}", r.classification.as_str());
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseCensus {
    pub p_phase: usize,
    pub pq_phase: usize,
    pub consequent_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularitySummary {
    pub points: usize,
    pub regular: usize,
    pub singular: usize,
    pub inconclusive: usize,
    /// Smallest probe over the points that have one.
    pub delta_g_probe: Option<f64>,
    pub sigma_g_probe: Option<f64>,
    pub phase_census: PhaseCensus,
    pub gamma: f64,
}

/// Counts, the conservative integrability probes and the phase census over
/// the smallest resolved ball of every point.
pub fn summarize(density: &DensityProfile, reports: &[RegularityReport], gamma: f64) -> Result<RegularitySummary> {
    let count = |c| reports.iter().filter(|r| r.classification == c).count();
    let min_of = |f: fn(&RegularityReport) -> Option<f64>| reports.iter().filter_map(f).reduce(f64::min);
    let mut census = PhaseCensus::default();
    for r in reports {
        if let Some(&rho) = r.radii.last() {
            let label = phase_classify(density, &Ball::new(r.point.clone(), rho)?, gamma)?;
            match label.label {
                Phase::PPhase => census.p_phase += 1,
                Phase::PqPhase => census.pq_phase += 1,
            }
            if !label.consequent_holds {
                census.consequent_violations += 1;
            }
        }
    }
    Ok(RegularitySummary {
        points: reports.len(),
        regular: count(Classification::Regular),
        singular: count(Classification::Singular),
        inconclusive: count(Classification::Inconclusive),
        delta_g_probe: min_of(|r| r.delta_g_probe),
        sigma_g_probe: min_of(|r| r.sigma_g_probe),
        phase_census: census,
        gamma,
    })
}

/// Points classified singular.
pub fn singular_points(reports: &[RegularityReport]) -> Vec<Vec<f64>> {
    reports.iter().filter(|r| r.classification == Classification::Singular).map(|r| r.point.clone()).collect()
}
