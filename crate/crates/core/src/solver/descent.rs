//! Line-search descent shared by every discrete minimization in the crate:
//! sphere-valued fields, box-constrained scalar fields and free problems.

use serde::{Deserialize, Serialize};

use super::SolveOptions;
use crate::error::{Error, Result};

/// Smooth objective over a node-major value vector.
pub(crate) trait Objective: Sync {
    fn energy(&self, values: &[f64]) -> Result<f64>;
    /// Writes the full gradient into `grad` (overwriting it).
    fn gradient(&self, values: &[f64], grad: &mut [f64]) -> Result<()>;
    /// `energy(new) - energy(old)`; implementations should resolve changes
    /// far below the rounding level of the energies.
    fn energy_change(&self, old: &[f64], new: &[f64]) -> Result<f64> {
        Ok(self.energy(new)? - self.energy(old)?)
    }
}

/// How trial points are mapped back onto the admissible set.
#[derive(Clone, Debug)]
pub(crate) enum Retraction {
    /// Normalize every free node onto the unit sphere.
    Sphere,
    /// Clamp each component into `[lower[c], upper[c]]`.
    Clamp { lower: Vec<f64>, upper: Vec<f64> },
}

/// Rule producing search directions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Steepest descent for sphere-valued problems, conjugate gradients otherwise.
    #[default]
    Auto,
    /// Projected steepest descent with Barzilai-Borwein trial steps.
    Steepest,
    /// Polak-Ribiere+ nonlinear conjugate gradients with an interpolated step.
    ConjugateGradient,
}

/// Why a solve stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    GradientTolerance,
    EnergyTolerance,
    MaxIterations,
    /// The line search failed to decrease the energy within the allowed
    /// backtracks; the last accepted iterate is returned.
    Stalled,
}

pub(crate) struct Problem<'a> {
    pub objective: &'a dyn Objective,
    pub comps: usize,
    pub free: &'a [bool],
    pub retraction: Retraction,
    /// Cell volume `h^n`; turns the gradient into its L2 representative.
    pub metric: f64,
    /// Natural step scale `h^2`.
    pub step_unit: f64,
}

pub(crate) struct Outcome {
    pub iterations: usize,
    pub energy_trace: Vec<f64>,
    pub grad_norm: f64,
    pub status: Status,
}

impl Problem<'_> {
    /// Admissible part of the gradient: zero on fixed nodes, tangent to the
    /// sphere, and without components pushing against active bounds.
    fn project(&self, x: &[f64], g: &[f64], out: &mut [f64]) {
        let m = self.comps;
        for (node, &free) in self.free.iter().enumerate() {
            let r = node * m..(node + 1) * m;
            if !free {
                out[r].iter_mut().for_each(|v| *v = 0.0);
                continue;
            }
            match &self.retraction {
                Retraction::Sphere => {
                    let u = &x[r.clone()];
                    let gu = &g[r.clone()];
                    let dot: f64 = u.iter().zip(gu).map(|(a, b)| a * b).sum();
                    for c in 0..m {
                        out[r.start + c] = gu[c] - dot * u[c];
                    }
                }
                Retraction::Clamp { lower, upper } => {
                    for c in 0..m {
                        let (xi, gi) = (x[r.start + c], g[r.start + c]);
                        let blocked = (xi <= lower[c] && gi > 0.0) || (xi >= upper[c] && gi < 0.0);
                        out[r.start + c] = if blocked { 0.0 } else { gi };
                    }
                }
            }
        }
    }

    /// `x + t d` mapped back onto the admissible set, written into `out`.
    fn retract(&self, x: &[f64], d: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        let m = self.comps;
        out.copy_from_slice(x);
        for (node, &free) in self.free.iter().enumerate() {
            if !free {
                continue;
            }
            let r = node * m..(node + 1) * m;
            match &self.retraction {
                Retraction::Sphere => {
                    let mut n2 = 0.0;
                    for i in r.clone() {
                        out[i] = x[i] + t * d[i];
                        n2 += out[i] * out[i];
                    }
                    if !(n2 > 0.0) {
                        return Err(Error::ProjectionUndefined);
                    }
                    let inv = 1.0 / n2.sqrt();
                    out[r].iter_mut().for_each(|v| *v *= inv);
                }
                Retraction::Clamp { lower, upper } => {
                    for c in 0..m {
                        let i = r.start + c;
                        out[i] = (x[i] + t * d[i]).clamp(lower[c], upper[c]);
                    }
                }
            }
        }
        Ok(())
    }

    fn tangent_part(&self, x: &[f64], d: &mut [f64]) {
        if let Retraction::Sphere = self.retraction {
            let m = self.comps;
            for node in 0..self.free.len() {
                let r = node * m..(node + 1) * m;
                let dot: f64 = x[r.clone()].iter().zip(&d[r.clone()]).map(|(a, b)| a * b).sum();
                for i in r {
                    d[i] -= dot * x[i];
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn descend(
    problem: &Problem<'_>,
    x: &mut [f64],
    opts: &SolveOptions,
    direction: Direction,
) -> Result<Outcome> {
    let len = x.len();
    let cg = direction == Direction::ConjugateGradient;
    let mut energy = problem.objective.energy(x)?;
    let mut trace = vec![energy];
    let mut g = vec![0.0; len];
    let mut pg = vec![0.0; len];
    problem.objective.gradient(x, &mut g)?;
    problem.project(x, &g, &mut pg);
    let metric = problem.metric;
    let norm_of = |v: &[f64]| (dot(v, v) / metric).sqrt();
    let mut grad_norm = norm_of(&pg);
    if grad_norm <= opts.grad_tol {
        return Ok(Outcome { iterations: 0, energy_trace: trace, grad_norm, status: Status::GradientTolerance });
    }

    let mut d: Vec<f64> = pg.iter().map(|v| -v / metric).collect();
    let mut t = opts.step0 * problem.step_unit;
    let mut trial = vec![0.0; len];
    let mut best = vec![0.0; len];
    let mut g_new = vec![0.0; len];
    let mut pg_new = vec![0.0; len];
    let mut prev_slope = f64::NAN;

    for iter in 1..=opts.max_iters {
        let mut slope = dot(&pg, &d);
        if !(slope < 0.0) {
            d.iter_mut().zip(&pg).for_each(|(di, gi)| *di = -gi / metric);
            slope = dot(&pg, &d);
        }
        if cg && prev_slope.is_finite() {
            t *= (prev_slope / slope).clamp(1e-3, 1e3);
        }
        let mut accepted = None;
        let mut step = t;
        for _ in 0..=opts.max_backtracks {
            problem.retract(x, &d, step, &mut trial)?;
            let decrease: f64 = g.iter().zip(trial.iter().zip(x.iter())).map(|(gi, (a, b))| gi * (a - b)).sum();
            match problem.objective.energy_change(x, &trial) {
                Ok(de) if de < 0.0 && de <= opts.armijo_c * decrease.min(0.0) => {
                    accepted = Some(de);
                    break;
                }
                Ok(_) | Err(Error::Domain(_)) => step *= opts.armijo_shrink,
                Err(err) => return Err(err),
            }
        }
        let Some(mut change) = accepted else {
            return Ok(Outcome { iterations: iter - 1, energy_trace: trace, grad_norm, status: Status::Stalled });
        };
        if cg {
            // One interpolation step from (0, 0, slope) and (step, change).
            let curv = change - slope * step;
            if curv > 0.0 {
                let t_star = -slope * step * step / (2.0 * curv);
                if t_star > 0.05 * step && t_star < 20.0 * step && (t_star - step).abs() > 1e-3 * step {
                    problem.retract(x, &d, t_star, &mut best)?;
                    if let Ok(c_star) = problem.objective.energy_change(x, &best) {
                        if c_star < change {
                            change = c_star;
                            std::mem::swap(&mut trial, &mut best);
                            step = t_star;
                        }
                    }
                }
            }
        }

        let s: Vec<f64> = trial.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        x.copy_from_slice(&trial);
        let e_old = energy;
        energy += change;
        trace.push(energy);
        problem.objective.gradient(x, &mut g_new)?;
        problem.project(x, &g_new, &mut pg_new);
        grad_norm = norm_of(&pg_new);
        if grad_norm <= opts.grad_tol {
            return Ok(Outcome { iterations: iter, energy_trace: trace, grad_norm, status: Status::GradientTolerance });
        }
        if -change <= opts.energy_tol * e_old.abs().max(f64::MIN_POSITIVE) {
            return Ok(Outcome { iterations: iter, energy_trace: trace, grad_norm, status: Status::EnergyTolerance });
        }

        if cg {
            let denom = dot(&pg, &pg);
            let beta = if denom > 0.0 {
                (pg_new.iter().zip(&pg).map(|(a, b)| a * (a - b)).sum::<f64>() / denom).max(0.0)
            } else {
                0.0
            };
            problem.tangent_part(x, &mut d);
            d.iter_mut().zip(&pg_new).for_each(|(di, gi)| *di = -gi / metric + beta * *di);
            prev_slope = slope;
            t = step;
        } else {
            let y: Vec<f64> = pg_new.iter().zip(&pg).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            let ss = dot(&s, &s);
            t = if sy > 0.0 { metric * ss / sy } else { 2.0 * step };
            d.iter_mut().zip(&pg_new).for_each(|(di, gi)| *di = -gi / metric);
        }
        std::mem::swap(&mut g, &mut g_new);
        std::mem::swap(&mut pg, &mut pg_new);
    }
    Ok(Outcome { iterations: opts.max_iters, energy_trace: trace, grad_norm, status: Status::MaxIterations })
}
