use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn one() -> f64 {
    1.0
}

/// Growth and modulus exponents of the double-phase density together with
/// the ellipticity bounds `nu <= 1 <= L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    /// Hölder exponent of the coefficient.
    pub alpha: f64,
    /// Exponent of the modulus of continuity in the `v` argument.
    #[serde(default = "one")]
    pub beta: f64,
    /// Hölder exponent of the radial density in `x`.
    #[serde(default = "one")]
    pub beta1: f64,
    #[serde(default = "one")]
    pub nu: f64,
    #[serde(default = "one", rename = "L")]
    pub l_upper: f64,
}

impl Exponents {
    /// Exponents with unit moduli and unit ellipticity bounds.
    pub fn new(p: f64, q: f64, alpha: f64) -> Result<Self> {
        let e = Exponents { p, q, alpha, beta: 1.0, beta1: 1.0, nu: 1.0, l_upper: 1.0 };
        e.validate()?;
        Ok(e)
    }

    pub fn with_bounds(mut self, nu: f64, l_upper: f64) -> Result<Self> {
        self.nu = nu;
        self.l_upper = l_upper;
        self.validate_growth()?;
        Ok(self)
    }

    /// Exponents satisfying every requirement except the gap `q < p + alpha`.
    /// Enough to evaluate the integrand and its derivatives; the regularity
    /// machinery calls [`Exponents::validate`].
    pub fn growth(p: f64, q: f64, alpha: f64) -> Result<Self> {
        let e = Exponents { p, q, alpha, beta: 1.0, beta1: 1.0, nu: 1.0, l_upper: 1.0 };
        e.validate_growth()?;
        Ok(e)
    }

    /// Full check, including the strict gap `q < p + alpha`.
    pub fn validate(&self) -> Result<()> {
        self.validate_growth()?;
        if !(self.q < self.p + self.alpha) {
            return Err(Error::Exponent(format!(
                "q = {} must be strictly below p + alpha = {}",
                self.q,
                self.p + self.alpha
            )));
        }
        Ok(())
    }

    pub fn satisfies_gap(&self) -> bool {
        self.validate().is_ok()
    }

    pub fn validate_growth(&self) -> Result<()> {
        let Exponents { p, q, alpha, beta, beta1, nu, l_upper } = *self;
        let all = [p, q, alpha, beta, beta1, nu, l_upper];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Exponent("all exponents must be finite".into()));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Exponent(format!("alpha = {alpha} must lie in (0, 1]")));
        }
        if !(p > 1.0) {
            return Err(Error::Exponent(format!("p = {p} must exceed 1")));
        }
        if !(q > p) {
            return Err(Error::Exponent(format!("q = {q} must exceed p = {p}")));
        }
        for (name, v) in [("beta", beta), ("beta1", beta1), ("nu", nu)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Exponent(format!("{name} = {v} must lie in (0, 1]")));
            }
        }
        if !(l_upper >= 1.0) {
            return Err(Error::Exponent(format!("L = {l_upper} must be at least 1")));
        }
        Ok(())
    }

    /// The extra requirement `q < N` of the sphere-constrained setting.
    pub fn validate_target(&self, target_dim: usize) -> Result<()> {
        self.validate()?;
        if !(self.q < target_dim as f64) {
            return Err(Error::Exponent(format!("q = {} must be below the target dimension {target_dim}", self.q)));
        }
        Ok(())
    }

    /// `s = alpha + (gamma - 1)(q - p)`, the exponent of the phase threshold.
    pub fn phase_exponent(&self, gamma: f64) -> f64 {
        self.alpha + (gamma - 1.0) * (self.q - self.p)
    }
}
