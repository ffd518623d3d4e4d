//! Sampled checks of the structural assumptions on a Musielak function.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ball_samples, Musielak};
use crate::error::{Error, Result};
use crate::grid::Ball;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomCheck {
    /// Smallest constant making the inequality hold on the sample (for the
    /// `beta3` check: the largest admissible value, 0 if none).
    pub observed: f64,
    pub declared: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlCheck {
    pub beta4: f64,
    /// Largest `sup_B Phi(beta4 t) / inf_B Phi(t)` over sampled balls and
    /// `1 <= t <= 1/r`.
    pub observed: f64,
    pub declared: Option<f64>,
    /// `(radius, worst ratio)` per radius band, from large to small balls.
    pub bands: Vec<(f64, f64)>,
    /// Slope of `log worst` against `log r` over the small-ball bands; a
    /// negative slope means the ratio blows up as the balls shrink.
    pub trend_slope: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub samples: usize,
    /// `Phi(x, t) <= m t^n` for `t >= 1`.
    pub m_envelope: AxiomCheck,
    /// Largest logarithmic growth rate of `Phi` at large `t`.
    pub growth_slope: f64,
    /// `Phi(x, beta3) <= 1 <= Phi(x, 1/beta3)`.
    pub beta3: AxiomCheck,
    /// `Phi(x, s)/s <= C Phi(x, t)/t` for `s <= t`.
    pub quasi_monotone: AxiomCheck,
    /// Two-sided `(p, q)` comparison with constant `c_g`.
    pub c_g: AxiomCheck,
    pub growth_exponents: (f64, f64),
    pub controllo: ControlCheck,
    pub all_passed: bool,
}

const REL: f64 = 1e-9;

fn within(observed: f64, declared: Option<f64>) -> bool {
    observed.is_finite() && declared.is_none_or(|d| observed <= d * (1.0 + REL))
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}

/// Least-squares slope of `ys` against `xs`.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Radius bands `10^(-b/2)`, `b = 0..=8`.
const BANDS: usize = 9;
/// Bands from this index on enter the trend fit.
const TREND_FROM: usize = 4;
/// Worst centers re-examined in the next band, and jittered copies of each.
const ZOOM_KEEP: usize = 8;
const ZOOM_COPIES: usize = 8;
/// Ratios growing faster than `r^0.05` as `r -> 0` fail the comparison.
const TREND_TOLERANCE: f64 = -0.05;

/// Samples points, `s <= t` pairs and balls, and reports the smallest
/// constants for which each axiom holds on the sample, together with
/// pass/fail against the constants the function declares.
pub fn axiom_probe(phi: &dyn Musielak, budget: usize, seed: u64) -> Result<AxiomReport> {
    if budget == 0 {
        return Err(Error::Options("the probe needs a positive sample budget".into()));
    }
    let domain = phi.domain();
    let n = domain.dim();
    let declared = phi.declared();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec<f64>> = (0..budget)
        .map(|_| {
            domain
                .lower
                .iter()
                .zip(&domain.upper)
                .map(|(a, b)| {
                    let pad = 1e-6 * (b - a);
                    rng.gen_range(a + pad..b - pad)
                })
                .collect()
        })
        .collect();

    // Envelope and growth at large t.
    let mut m_obs: f64 = 0.0;
    let mut growth_slope = f64::NEG_INFINITY;
    for x in &xs {
        let t = log_uniform(&mut rng, 1.0, 1e3);
        m_obs = m_obs.max(phi.eval(x, t) / t.powi(n as i32));
        m_obs = m_obs.max(phi.eval(x, 1.0));
        let (top, below) = (phi.eval(x, 1e4), phi.eval(x, 1e3));
        if top > 0.0 && below > 0.0 {
            growth_slope = growth_slope.max((top / below).log10());
        }
    }
    let m_envelope = AxiomCheck {
        observed: m_obs,
        declared: declared.m_envelope,
        passed: growth_slope <= n as f64 + 1e-6 && within(m_obs, declared.m_envelope),
    };

    // beta3: largest value on a grid admissible at every sampled x.
    let admissible = |b: f64| xs.iter().all(|x| phi.eval(x, b) <= 1.0 && phi.eval(x, 1.0 / b) >= 1.0);
    let beta3_obs = (1..100).rev().map(|k| k as f64 / 100.0).find(|&b| admissible(b)).unwrap_or(0.0);
    let beta3 = AxiomCheck {
        observed: beta3_obs,
        declared: declared.beta3,
        passed: beta3_obs > 0.0 && declared.beta3.is_none_or(|b| b > 0.0 && b < 1.0 && admissible(b)),
    };

    // Pairs s <= t.
    let (pg, qg) = phi.growth_exponents();
    let (mut quasi, mut cg): (f64, f64) = (1.0, 1.0);
    for x in &xs {
        let t = log_uniform(&mut rng, 1e-3, 1e3);
        let s = t * 10f64.powf(-3.0 * rng.gen_range(0.0..1.0));
        let (fs, ft) = (phi.eval(x, s), phi.eval(x, t));
        if ft > 0.0 {
            quasi = quasi.max((fs / s) / (ft / t));
            cg = cg.max((fs / s.powf(pg)) / (ft / t.powf(pg)));
        }
        if fs > 0.0 {
            cg = cg.max((ft / t.powf(qg)) / (fs / s.powf(qg)));
        }
    }
    let quasi_monotone = AxiomCheck {
        observed: quasi,
        declared: declared.quasi_monotone,
        passed: within(quasi, declared.quasi_monotone),
    };
    let c_g = AxiomCheck { observed: cg, declared: declared.c_g, passed: within(cg, declared.c_g) };

    let controllo = control_probe(phi, budget, &mut rng)?;
    let all_passed = m_envelope.passed && beta3.passed && quasi_monotone.passed && c_g.passed && controllo.passed;
    Ok(AxiomReport {
        samples: budget,
        m_envelope,
        growth_slope,
        beta3,
        quasi_monotone,
        c_g,
        growth_exponents: (pg, qg),
        controllo,
        all_passed,
    })
}

fn ball_ratio(phi: &dyn Musielak, ball: &Ball, beta4: f64) -> f64 {
    let samples = ball_samples(ball);
    let r = ball.radius;
    let mut worst: f64 = 1.0;
    for t in [1.0, r.powf(-0.5), 1.0 / r] {
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for x in &samples {
            hi = hi.max(phi.eval(x, beta4 * t));
            lo = lo.min(phi.eval(x, t));
        }
        let ratio = if lo > 0.0 {
            hi / lo
        } else if hi > 0.0 {
            f64::INFINITY
        } else {
            1.0
        };
        worst = worst.max(ratio);
    }
    worst
}

/// Sweeps radius bands from 1 down to 1e-4. The first band uses random
/// centers; every later band re-examines the worst centers of the previous
/// one with jittered copies, so balls straddling a bad set are tracked as
/// they shrink. Critical points of the function are included in every band.
fn control_probe(phi: &dyn Musielak, budget: usize, rng: &mut ChaCha8Rng) -> Result<ControlCheck> {
    let domain = phi.domain();
    let declared = phi.declared();
    let beta4 = declared.beta4.unwrap_or(1.0);
    if !(beta4 > 0.0 && beta4 <= 1.0) {
        return Err(Error::Options(format!("beta4 = {beta4} must lie in (0, 1]")));
    }
    let critical = phi.critical_points();
    let fit = |c: &[f64], r: f64| -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(c.len());
        for (v, (a, b)) in c.iter().zip(domain.lower.iter().zip(&domain.upper)) {
            if b - a < 2.0 * r {
                return None;
            }
            out.push(v.clamp(a + r, b - r));
        }
        Some(out)
    };
    let mut bands = Vec::with_capacity(BANDS);
    let mut previous: Vec<(f64, Vec<f64>)> = Vec::new();
    let first_count = (budget / 8).max(8);
    for b in 0..BANDS {
        let r = 10f64.powf(-(b as f64) / 2.0);
        let mut centers: Vec<Vec<f64>> = Vec::new();
        if b == 0 {
            for _ in 0..first_count {
                let c: Vec<f64> = domain.lower.iter().zip(&domain.upper).map(|(a, b)| rng.gen_range(*a..*b)).collect();
                centers.extend(fit(&c, r));
            }
        } else {
            let prev_r = 10f64.powf(-((b - 1) as f64) / 2.0);
            for (_, c) in previous.iter().take(ZOOM_KEEP) {
                centers.extend(fit(c, r));
                for _ in 0..ZOOM_COPIES {
                    let j: Vec<f64> = c.iter().map(|v| v + prev_r * rng.gen_range(-1.0..1.0)).collect();
                    centers.extend(fit(&j, r));
                }
            }
        }
        centers.extend(critical.iter().filter_map(|c| fit(c, r)));
        if centers.is_empty() {
            continue;
        }
        let mut scored: Vec<(f64, Vec<f64>)> =
            centers.into_iter().map(|c| (ball_ratio(phi, &Ball { center: c.clone(), radius: r }, beta4), c)).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        bands.push((r, scored[0].0));
        previous = scored;
    }
    let observed = bands.iter().map(|b| b.1).fold(1.0, f64::max);
    let tail: Vec<&(f64, f64)> = bands.iter().filter(|(r, _)| *r <= 10f64.powf(-(TREND_FROM as f64) / 2.0)).collect();
    let trend_slope = if tail.iter().any(|(_, w)| !w.is_finite()) {
        f64::NEG_INFINITY
    } else {
        let lx: Vec<f64> = tail.iter().map(|(r, _)| r.ln()).collect();
        let ly: Vec<f64> = tail.iter().map(|(_, w)| w.ln()).collect();
        slope(&lx, &ly)
    };
    Ok(ControlCheck {
        beta4,
        observed,
        declared: declared.c_d,
        bands,
        trend_slope,
        passed: trend_slope >= TREND_TOLERANCE && within(observed, declared.c_d),
    })
}
