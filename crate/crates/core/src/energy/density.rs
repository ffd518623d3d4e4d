use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Exponents;
use crate::error::{Error, Result};
use crate::grid::{norm, Ball, CoefficientField};

/// A bounded positive factor `b(x, v)` multiplying the double-phase density.
pub trait Modulation: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64], v: &[f64]) -> f64;
    /// Gradient of `b` with respect to `v`, written into `out`.
    fn grad_v(&self, x: &[f64], v: &[f64], out: &mut [f64]);
    /// Bounds `(nu1, L1)` with `nu1 <= b <= L1` everywhere.
    fn bounds(&self) -> (f64, f64);
}

/// `b(x, v) = base + amplitude * tanh(direction . v)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TanhModulation {
    pub base: f64,
    pub amplitude: f64,
    pub direction: Vec<f64>,
}

impl TanhModulation {
    pub fn new(base: f64, amplitude: f64, direction: Vec<f64>) -> Result<Self> {
        if !(amplitude >= 0.0 && base - amplitude > 0.0) {
            return Err(Error::Variant(format!("modulation {base} +/- {amplitude} must stay positive")));
        }
        Ok(TanhModulation { base, amplitude, direction })
    }
}

impl Modulation for TanhModulation {
    fn value(&self, _x: &[f64], v: &[f64]) -> f64 {
        let s: f64 = self.direction.iter().zip(v).map(|(d, x)| d * x).sum();
        self.base + self.amplitude * s.tanh()
    }

    fn grad_v(&self, _x: &[f64], v: &[f64], out: &mut [f64]) {
        let s: f64 = self.direction.iter().zip(v).map(|(d, x)| d * x).sum();
        let sech2 = 1.0 - s.tanh().powi(2);
        for (o, d) in out.iter_mut().zip(&self.direction) {
            *o = self.amplitude * sech2 * d;
        }
    }

    fn bounds(&self) -> (f64, f64) {
        (self.base - self.amplitude, self.base + self.amplitude)
    }
}

/// Which frozen envelope of the density to evaluate on a ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Minus,
    Plus,
}

/// Radial density value and its first two derivatives in `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Radial {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// The integrand `F(x, v, z) = b(x, v) (|z|^p + a(x) |z|^q)`, with `b = 1`
/// for the pure variant. Optionally frozen at a fixed second argument.
#[derive(Clone, Debug)]
pub struct DensityProfile {
    exponents: Exponents,
    coefficient: Arc<CoefficientField>,
    modulation: Option<Arc<dyn Modulation>>,
    frozen: Option<Vec<f64>>,
}

impl DensityProfile {
    /// Unweighted density. Only the growth requirements are checked here; the
    /// gap `q < p + alpha` is enforced by the operations that rely on it.
    pub fn pure(exponents: Exponents, coefficient: CoefficientField) -> Result<Self> {
        exponents.validate_growth()?;
        Ok(DensityProfile { exponents, coefficient: Arc::new(coefficient), modulation: None, frozen: None })
    }

    /// Weighted variant; the exponent pack's `(nu, L)` are replaced by the
    /// modulation bounds.
    pub fn weighted(
        exponents: Exponents,
        coefficient: CoefficientField,
        modulation: Arc<dyn Modulation>,
    ) -> Result<Self> {
        let (lo, hi) = modulation.bounds();
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Variant(format!("modulation bounds ({lo}, {hi}) are not admissible")));
        }
        let exponents = Exponents { nu: lo.min(1.0), l_upper: hi.max(1.0), ..exponents };
        exponents.validate_growth()?;
        Ok(DensityProfile { exponents, coefficient: Arc::new(coefficient), modulation: Some(modulation), frozen: None })
    }

    /// Copy of the density with its second argument fixed at `v`.
    pub fn frozen_at(&self, v: &[f64]) -> DensityProfile {
        DensityProfile { frozen: Some(v.to_vec()), ..self.clone() }
    }

    pub fn exponents(&self) -> &Exponents {
        &self.exponents
    }

    pub fn coefficient(&self) -> &CoefficientField {
        &self.coefficient
    }

    pub fn is_weighted(&self) -> bool {
        self.modulation.is_some()
    }

    pub fn frozen_point(&self) -> Option<&[f64]> {
        self.frozen.as_deref()
    }

    /// Whether the integrand depends on the field values themselves.
    pub(crate) fn depends_on_values(&self) -> bool {
        self.modulation.is_some() && self.frozen.is_none()
    }

    /// `(nu1, L1)` such that `nu1 H <= F <= L1 H`.
    pub fn ellipticity_bounds(&self) -> (f64, f64) {
        self.modulation.as_ref().map_or((1.0, 1.0), |m| m.bounds())
    }

    /// `b(x, v)`, using the frozen point when set.
    pub fn modulation_at(&self, x: &[f64], v: &[f64]) -> f64 {
        match &self.modulation {
            None => 1.0,
            Some(m) => m.value(x, self.frozen.as_deref().unwrap_or(v)),
        }
    }

    pub(crate) fn modulation_grad(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        match (&self.modulation, &self.frozen) {
            (Some(m), None) => m.grad_v(x, v, out),
            _ => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    /// `t^p + a t^q`.
    #[inline]
    pub fn h_radial(&self, a: f64, t: f64) -> f64 {
        let Exponents { p, q, .. } = self.exponents;
        t.powf(p) + if a == 0.0 { 0.0 } else { a * t.powf(q) }
    }

    /// `H'(t) / t`, finite for `t > 0` and at `t = 0` when both active
    /// exponents are at least 2.
    #[inline]
    pub(crate) fn h_slope_over_t(&self, a: f64, t: f64) -> f64 {
        let Exponents { p, q, .. } = self.exponents;
        p * t.powf(p - 2.0) + if a == 0.0 { 0.0 } else { a * q * t.powf(q - 2.0) }
    }

    /// `b(t^p + a t^q)` with its first and second `t` derivatives.
    pub fn radial(&self, a: f64, b: f64, t: f64) -> Radial {
        let Exponents { p, q, .. } = self.exponents;
        let (tp, tq) = (t.powf(p), if a == 0.0 { 0.0 } else { t.powf(q) });
        let d1p = p * t.powf(p - 1.0);
        let d2p = p * (p - 1.0) * t.powf(p - 2.0);
        let (d1q, d2q) = if a == 0.0 { (0.0, 0.0) } else { (q * t.powf(q - 1.0), q * (q - 1.0) * t.powf(q - 2.0)) };
        Radial { value: b * (tp + a * tq), d1: b * (d1p + a * d1q), d2: b * (d2p + a * d2q) }
    }

    /// `H(x_node, z) = |z|^p + a(x_node) |z|^q`, times the modulation when the
    /// density is weighted (which then must be frozen).
    pub fn eval_h(&self, node: usize, z: &[f64]) -> Result<f64> {
        match (&self.modulation, &self.frozen) {
            (None, _) => self.eval_pure(node, z),
            (Some(_), Some(v)) => self.eval_f(node, &v.clone(), z),
            (Some(_), None) => {
                Err(Error::Variant("a weighted density needs a frozen point or an explicit v; use eval_f".into()))
            }
        }
    }

    fn eval_pure(&self, node: usize, z: &[f64]) -> Result<f64> {
        self.coefficient.grid().check_node(node)?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("gradient argument is not finite".into()));
        }
        Ok(self.h_radial(self.coefficient.value(node), norm(z)))
    }

    /// `F(x_node, v, z)`.
    pub fn eval_f(&self, node: usize, v: &[f64], z: &[f64]) -> Result<f64> {
        let h = self.eval_pure(node, z)?;
        let x = self.coefficient.grid().point(node);
        Ok(self.modulation_at(&x, v) * h)
    }

    /// `t^p + a_i t^q` (minus) or `t^p + a_s t^q` (plus) with `a_i, a_s` the
    /// extreme node samples of the coefficient in the closed ball.
    pub fn eval_h_frozen(&self, ball: &Ball, t: f64, side: Side) -> Result<f64> {
        let (lo, hi) = self.coefficient.min_max_in_ball(ball)?;
        Ok(self.h_radial(if side == Side::Minus { lo } else { hi }, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn density(a: f64) -> DensityProfile {
        let g = Grid::cube(2, 0.0, 1.0, 5).unwrap();
        DensityProfile::pure(Exponents::growth(2.0, 3.0, 1.0).unwrap(), CoefficientField::constant(&g, a).unwrap())
            .unwrap()
    }

    #[test]
    fn pure_density_values() {
        assert_eq!(density(0.5).eval_h(3, &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(density(0.0).eval_h(3, &[2.0, 0.0]).unwrap(), 4.0);
        assert_eq!(density(0.5).eval_h(3, &[2.0, 0.0]).unwrap(), 8.0);
    }

    #[test]
    fn pure_density_errors() {
        assert!(matches!(density(0.5).eval_h(25, &[1.0]), Err(Error::Index { .. })));
        assert!(matches!(density(0.5).eval_h(0, &[f64::NAN]), Err(Error::Domain(_))));
    }

    #[test]
    fn frozen_minus_uses_ball_minimum() {
        let g = Grid::cube(2, 0.0, 1.0, 41).unwrap();
        let a = CoefficientField::from_fn(&g, 1.0, |x| x[0]).unwrap();
        let d = DensityProfile::pure(Exponents::new(2.0, 2.5, 1.0).unwrap(), a).unwrap();
        let ball = Ball::new(vec![0.5, 0.5], 0.25).unwrap();
        assert!((d.eval_h_frozen(&ball, 1.0, Side::Minus).unwrap() - 1.25).abs() < 1e-12);
        assert!((d.eval_h_frozen(&ball, 1.0, Side::Plus).unwrap() - 1.75).abs() < 1e-12);
    }

    #[test]
    fn radial_derivatives_match_differences() {
        let d = density(0.7);
        let (t, e) = (1.3, 1e-6);
        let r = d.radial(0.7, 1.4, t);
        let fp = d.radial(0.7, 1.4, t + e);
        let fm = d.radial(0.7, 1.4, t - e);
        assert!(((fp.value - fm.value) / (2.0 * e) - r.d1).abs() < 1e-6);
        assert!(((fp.d1 - fm.d1) / (2.0 * e) - r.d2).abs() < 1e-6);
    }

    #[test]
    fn weighted_density_requires_a_point() {
        let g = Grid::cube(2, 0.0, 1.0, 5).unwrap();
        let m = Arc::new(TanhModulation::new(1.0, 0.5, vec![1.0, 0.0, 0.0]).unwrap());
        let d =
            DensityProfile::weighted(Exponents::new(2.0, 2.5, 1.0).unwrap(), CoefficientField::zero(&g), m).unwrap();
        assert!(matches!(d.eval_h(0, &[1.0]), Err(Error::Variant(_))));
        assert_eq!(d.ellipticity_bounds(), (0.5, 1.5));
        let f = d.frozen_at(&[0.0, 0.0, 1.0]);
        assert!((f.eval_h(0, &[2.0]).unwrap() - 4.0).abs() < 1e-12);
    }
}
