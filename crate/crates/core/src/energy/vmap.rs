//! The maps `V_t(z) = |z|^((t-2)/2) z`, the monotonicity inner product of
//! the density and the convex conjugate of a frozen double-phase function.

use super::DensityProfile;
use crate::error::{Error, Result};
use crate::grid::norm;

/// `|z|^((t-2)/2) z`, with `V_t(0) = 0`.
pub fn v_map(z: &[f64], t: f64) -> Vec<f64> {
    let r = norm(z);
    if r == 0.0 {
        return vec![0.0; z.len()];
    }
    let s = r.powf((t - 2.0) / 2.0);
    z.iter().map(|x| s * x).collect()
}

/// `|V_t(z1) - V_t(z2)| / ((|z1| + |z2|)^((t-2)/2) |z1 - z2|)`.
pub fn v_equivalence_ratio(z1: &[f64], z2: &[f64], t: f64) -> Result<f64> {
    let diff: Vec<f64> = z1.iter().zip(z2).map(|(a, b)| a - b).collect();
    let d = norm(&diff);
    if d == 0.0 {
        return Err(Error::DegeneratePair);
    }
    let (v1, v2) = (v_map(z1, t), v_map(z2, t));
    let vd: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| a - b).collect();
    Ok(norm(&vd) / ((norm(z1) + norm(z2)).powf((t - 2.0) / 2.0) * d))
}

/// Raw inner product `(dF(z1) - dF(z2)) . (z1 - z2)` and the gap obtained by
/// subtracting `c^-1 (|V_p(z1) - V_p(z2)|^2 + a |V_q(z1) - V_q(z2)|^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonotonicityGap {
    pub inner: f64,
    pub gap: f64,
}

/// Monotonicity probe of the density at a node. `mu > 0` regularizes the
/// derivative at `z = 0` when `p < 2`. Weighted densities are evaluated at
/// their frozen point.
pub fn monotonicity_gap(
    density: &DensityProfile,
    node: usize,
    z1: &[f64],
    z2: &[f64],
    c: f64,
    mu: f64,
) -> Result<MonotonicityGap> {
    density.coefficient().grid().check_node(node)?;
    if density.depends_on_values() {
        return Err(Error::Variant("monotonicity probe needs a frozen weighted density".into()));
    }
    let a = density.coefficient().value(node);
    let x = density.coefficient().grid().point(node);
    let b = density.frozen_point().map_or(1.0, |v| density.modulation_at(&x, v));
    let derivative = |z: &[f64]| -> Result<Vec<f64>> {
        let rho = (z.iter().map(|v| v * v).sum::<f64>() + mu * mu).sqrt();
        if rho == 0.0 {
            // Both exponents exceed 1, so dF vanishes continuously at 0.
            return Ok(vec![0.0; z.len()]);
        }
        let s = b * density.h_slope_over_t(a, rho);
        if !s.is_finite() {
            return Err(Error::Singularity("derivative undefined; use mu > 0".into()));
        }
        Ok(z.iter().map(|v| s * v).collect())
    };
    let (d1, d2) = (derivative(z1)?, derivative(z2)?);
    let inner: f64 = d1.iter().zip(&d2).zip(z1.iter().zip(z2)).map(|((a, b), (x, y))| (a - b) * (x - y)).sum();
    let e = density.exponents();
    let vdist = |t: f64| -> f64 {
        let (v1, v2) = (v_map(z1, t), v_map(z2, t));
        v1.iter().zip(&v2).map(|(x, y)| (x - y) * (x - y)).sum()
    };
    let gap = inner - (vdist(e.p) + a * vdist(e.q)) / c;
    Ok(MonotonicityGap { inner, gap })
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Convex conjugate `sup_{s>0} (s t - s^p - a0 s^q)` by golden-section
/// search on a bracket grown until the objective decreases.
pub fn conjugate_h0(t: f64, a0: f64, p: f64, q: f64) -> f64 {
    if !(t > 0.0) {
        return 0.0;
    }
    let g = |s: f64| s * t - s.powf(p) - a0 * s.powf(q);
    let mut hi = 1.0;
    while g(2.0 * hi) >= g(hi) && hi < 1e150 {
        hi *= 2.0;
    }
    let (mut lo, mut hi) = (0.0, 2.0 * hi);
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    for _ in 0..300 {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + GOLDEN * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - GOLDEN * (hi - lo);
            g1 = g(x1);
        }
    }
    g1.max(g2).max(0.0)
}
