use serde::{Deserialize, Serialize};

use super::ball_region;
use crate::energy::{h_energy, DensityProfile};
use crate::error::{Error, Result};
use crate::grid::{Ball, GridField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum MorreyFit {
    /// Least-squares slope of `log int_{B_t} H` against `log t`.
    Fitted { exponent: f64, r2: f64, radii: Vec<f64>, energies: Vec<f64> },
    /// The smallest ball carries no energy, so the logarithmic fit is undefined.
    NoEnergy,
}

/// Fits `int_{B_t(point)} H(x, Du) ~ t^exponent`. At least four radii
/// spanning a factor of ten are required.
pub fn morrey_decay_fit(
    density: &DensityProfile,
    field: &GridField,
    point: &[f64],
    radii: &[f64],
) -> Result<MorreyFit> {
    if radii.len() < 4 || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Options("the decay fit needs at least four positive radii".into()));
    }
    let (lo, hi) = radii.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    if hi < 10.0 * lo * (1.0 - 1e-12) {
        return Err(Error::Options(format!("radii span {:.3}, less than a decade", hi / lo)));
    }
    let mut sorted = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let energies: Vec<f64> = sorted
        .iter()
        .map(|&r| {
            let region = ball_region(field.grid(), &Ball::new(point.to_vec(), r)?)?;
            h_energy(density, field, &region)
        })
        .collect::<Result<_>>()?;
    if energies[0] == 0.0 {
        return Ok(MorreyFit::NoEnergy);
    }
    let xs: Vec<f64> = sorted.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = energies.iter().map(|e| e.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let exponent = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(MorreyFit::Fitted { exponent, r2, radii: sorted, energies })
}
