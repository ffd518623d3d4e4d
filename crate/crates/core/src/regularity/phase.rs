use serde::{Deserialize, Serialize};

use crate::energy::DensityProfile;
use crate::error::{Error, Result};
use crate::grid::Ball;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PPhase,
    PqPhase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseLabel {
    pub ball: Ball,
    pub label: Phase,
    /// `4 [a] r^(alpha - s)`.
    pub threshold: f64,
    /// `s = alpha + (gamma - 1)(q - p)`.
    pub s_value: f64,
    pub a_inf: f64,
    pub a_sup: f64,
    /// `6 [a] r^(alpha - s)` in the p-phase, `3/2 a_inf` otherwise.
    pub consequent_bound: f64,
    pub consequent_holds: bool,
}

/// Decides between the p-phase `a_inf(B) <= 4 [a] r^(alpha - s)` and the
/// (p, q)-phase, and checks the bound on `a_sup(B)` that each phase implies.
/// Coefficient extremes are node samples of the closed ball and `[a]` is the
/// coefficient's recorded seminorm. A constant coefficient has seminorm 0
/// and may carry any Holder exponent.
pub fn phase_classify(density: &DensityProfile, ball: &Ball, gamma: f64) -> Result<PhaseLabel> {
    if !(0.5..1.0).contains(&gamma) {
        return Err(Error::Options(format!("gamma = {gamma} must lie in [1/2, 1)")));
    }
    let exps = density.exponents();
    let coef = density.coefficient();
    if coef.holder_seminorm() > 0.0 && (coef.alpha() - exps.alpha).abs() > 1e-12 {
        return Err(Error::Exponent(format!(
            "coefficient seminorm uses alpha = {} but the exponents use {}",
            coef.alpha(),
            exps.alpha
        )));
    }
    let s_value = exps.phase_exponent(gamma);
    if !(s_value > 0.0) {
        return Err(Error::Exponent(format!("s = {s_value} must be positive")));
    }
    let seminorm = coef.holder_seminorm();
    let (a_inf, a_sup) = coef.min_max_in_ball(ball)?;
    let scale = ball.radius.powf(exps.alpha - s_value);
    let threshold = 4.0 * seminorm * scale;
    let (label, consequent_bound) =
        if a_inf <= threshold { (Phase::PPhase, 6.0 * seminorm * scale) } else { (Phase::PqPhase, 1.5 * a_inf) };
    Ok(PhaseLabel {
        ball: ball.clone(),
        label,
        threshold,
        s_value,
        a_inf,
        a_sup,
        consequent_bound,
        consequent_holds: a_sup <= consequent_bound,
    })
}
