//! Weighted Hausdorff measures of the detected singular set, split by the
//! phase of the coefficient at each flagged point.

use serde::{Deserialize, Serialize};

use super::{hausdorff_sweep, DoublePhasePhi, KappaSweep, Musielak, PointCloudSet};
use crate::energy::Exponents;
use crate::error::{Error, Result};
use crate::grid::CoefficientField;
use crate::regularity::{Classification, RegularityReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitMeasures {
    pub points: Vec<Vec<f64>>,
    pub sweep: KappaSweep,
    /// Raw estimates strictly decrease as kappa decreases (or all vanish).
    pub decays: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularMeasureReport {
    pub delta: f64,
    /// `q (1 + delta)`, required not to exceed the dimension.
    pub growth: f64,
    /// Flagged points with `a = 0`.
    pub p_split: SplitMeasures,
    /// Flagged points with `a > 0`.
    pub q_split: SplitMeasures,
    /// Requested kappas too large for balls about the flagged points to stay
    /// inside the domain.
    pub dropped_kappas: Vec<f64>,
}

fn split(phi: &DoublePhasePhi, points: Vec<Vec<f64>>, spacing: f64, kappas: &[f64]) -> Result<SplitMeasures> {
    let set = PointCloudSet::cells(points.clone(), spacing)?;
    let sweep = hausdorff_sweep(phi, &set, kappas)?;
    let est: Vec<f64> = sweep.rows.iter().map(|r| r.estimate).collect();
    let decays = est.iter().all(|e| *e == 0.0) || est.windows(2).all(|w| w[1] < w[0]);
    Ok(SplitMeasures { points, sweep, decays })
}

/// Sweeps the measures built from `[t^p + a t^q]^(1 + delta)` over the
/// points classified singular, separately on the two phases. `delta`
/// defaults to the smallest higher-integrability exponent probed at the
/// flagged points, or 0 if none was probed.
pub fn singular_set_measures(
    reports: &[RegularityReport],
    exponents: &Exponents,
    coefficient: &CoefficientField,
    delta: Option<f64>,
    kappas: &[f64],
) -> Result<SingularMeasureReport> {
    let flagged: Vec<&RegularityReport> =
        reports.iter().filter(|r| r.classification == Classification::Singular).collect();
    let delta = delta.unwrap_or_else(|| {
        let probed = flagged.iter().filter_map(|r| r.delta_g_probe).fold(f64::INFINITY, f64::min);
        if probed.is_finite() {
            probed
        } else {
            0.0
        }
    });
    let n = coefficient.grid().dim() as f64;
    let growth = exponents.q * (1.0 + delta);
    if growth > n + 1e-12 {
        return Err(Error::Scope(format!("q (1 + delta) = {growth} exceeds the dimension {n}")));
    }
    if kappas.is_empty() {
        return Err(Error::Options("the sweep needs at least one kappa".into()));
    }
    let phi = DoublePhasePhi::new(*exponents, coefficient.clone(), delta)?;
    let clearance = flagged.iter().map(|r| phi.domain().boundary_distance(&r.point)).fold(f64::INFINITY, f64::min);
    let (kept, dropped_kappas): (Vec<f64>, Vec<f64>) = kappas.iter().partition(|&&k| k <= clearance);
    if kept.is_empty() {
        return Err(Error::Geometry(format!("no kappa fits the clearance {clearance} of the flagged points")));
    }
    let (p_points, q_points): (Vec<Vec<f64>>, Vec<Vec<f64>>) =
        flagged.iter().map(|r| r.point.clone()).partition(|x| coefficient.value_at(x) <= 0.0);
    let spacing = coefficient.grid().spacing();
    Ok(SingularMeasureReport {
        delta,
        growth,
        p_split: split(&phi, p_points, spacing, &kept)?,
        q_split: split(&phi, q_points, spacing, &kept)?,
        dropped_kappas,
    })
}
