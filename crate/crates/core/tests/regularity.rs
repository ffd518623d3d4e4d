use dphase::energy::{DensityProfile, Exponents, Side};
use dphase::fields::{affine, hedgehog, two_hedgehog};
use dphase::grid::{Ball, CoefficientField, Grid, GridField};
use dphase::regularity::{
    caccioppoli_ratio, classify_grid, epsilon_regularity_test, excess, higher_integrability_ratio, intrinsic_quotient,
    morrey_decay_fit, poincare_ratio, probe_lattice, singular_indicator, CaccioppoliVariant, Classification, MorreyFit,
    RegularityOptions,
};

fn dirichlet(g: &Grid) -> DensityProfile {
    DensityProfile::pure(Exponents::new(2.0, 2.4, 0.5).unwrap(), CoefficientField::zero(g)).unwrap()
}

fn cube(nodes: usize) -> Grid {
    Grid::cube(3, -1.0, 1.0, nodes).unwrap()
}

fn scaled_identity(g: &Grid, s: f64) -> GridField {
    affine(g, &[0.1, -0.2, 0.3], &[s, 0.0, 0.0, 0.0, s, 0.0, 0.0, 0.0, s]).unwrap()
}

#[test]
fn hedgehog_quotient_is_six_at_the_origin() {
    let g = cube(64);
    let d = dirichlet(&g);
    let u = hedgehog(&g, &[0.0; 3]).unwrap();
    let report = singular_indicator(&d, &u, &[0.0; 3], &[0.8, 0.5, 0.3, 0.2], &RegularityOptions::default()).unwrap();
    for (rho, q) in report.radii.iter().zip(&report.intrinsic_quotients) {
        assert!((q - 6.0).abs() < 0.6, "quotient {q} at radius {rho}");
    }
    assert_eq!(report.classification, Classification::Singular);
    assert!(report.epsilon_sweep.iter().all(|o| !o.regular));
}

#[test]
fn hedgehog_quotient_decays_away_from_the_singularity() {
    let g = cube(64);
    let d = dirichlet(&g);
    let u = hedgehog(&g, &[0.0; 3]).unwrap();
    let x0 = [0.5, 0.0, 0.0];
    let report = singular_indicator(&d, &u, &x0, &[0.3, 0.2, 0.1], &RegularityOptions::default()).unwrap();
    let last = *report.intrinsic_quotients.last().unwrap();
    // |Du|^2 = 2 / |x|^2 is nearly constant on small balls about x0.
    assert!((last - 2.0 * 0.01 / 0.25).abs() < 0.01, "quotient {last}");
    assert!(report.intrinsic_quotients.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn quotient_is_scaled_excess_for_a_vanishing_coefficient() {
    let g = cube(32);
    let d = dirichlet(&g);
    let u = scaled_identity(&g, 0.7);
    for rho in [0.2, 0.35, 0.5] {
        let ball = Ball::new(vec![0.1, 0.0, -0.1], rho).unwrap();
        let e = excess(&d, &u, &ball).unwrap();
        assert!((e - 3.0 * 0.49).abs() < 1e-10);
        let q = intrinsic_quotient(&d, &ball, e).unwrap();
        assert!((q - rho * rho * e).abs() < 1e-12);
    }
}

#[test]
fn frozen_minus_density_grows_on_smaller_balls() {
    let g = cube(33);
    let a = CoefficientField::from_fn(&g, 0.5, |x| x[0].abs().sqrt()).unwrap();
    let d = DensityProfile::pure(Exponents::new(2.0, 2.4, 0.5).unwrap(), a).unwrap();
    let center = vec![0.3, 0.0, 0.0];
    let mut previous = 0.0;
    for rho in [0.6, 0.4, 0.2, 0.1] {
        let v = d.eval_h_frozen(&Ball::new(center.clone(), rho).unwrap(), 2.0, Side::Minus).unwrap();
        assert!(v >= previous);
        previous = v;
    }
}

#[test]
fn smooth_fields_pass_the_epsilon_test() {
    let g = cube(40);
    let d = dirichlet(&g);
    let opts = RegularityOptions::default();
    let probes = probe_lattice(&g, 3);
    let fields = [GridField::constant(g.clone(), &[0.0, 1.0, 0.0]).unwrap(), scaled_identity(&g, 0.2)];
    for u in &fields {
        let reports = classify_grid(&d, u, &probes, &[0.3, 0.2, 0.1], &opts).unwrap();
        assert!(reports.iter().all(|r| r.classification == Classification::Regular));
    }
    let ball = Ball::new(vec![0.5, 0.5, 0.0], 0.1).unwrap();
    assert!(epsilon_regularity_test(&d, &fields[1], &ball, 0.1).unwrap());
    assert!(!epsilon_regularity_test(&d, &fields[1], &ball, 0.01).unwrap());
}

#[test]
fn two_hedgehog_flags_both_singular_cells() {
    let g = cube(64);
    let d = dirichlet(&g);
    let s = 4.0 / 7.0;
    let u = two_hedgehog(&g, s).unwrap();
    let probes = probe_lattice(&g, 7);
    let reports = classify_grid(&d, &u, &probes, &[0.3, 0.2, 0.1], &RegularityOptions::default()).unwrap();
    let flagged: Vec<&Vec<f64>> =
        reports.iter().filter(|r| r.classification == Classification::Singular).map(|r| &r.point).collect();
    assert_eq!(flagged.len(), 2, "flagged {flagged:?}");
    for p in flagged {
        assert!((p[0].abs() - s).abs() < 1e-12 && p[1].abs() < 1e-12 && p[2].abs() < 1e-12);
    }
}

#[test]
fn caccioppoli_and_poincare_on_affine_fields() {
    let g = cube(64);
    let d = dirichlet(&g);
    let u = scaled_identity(&g, 0.5);
    let c = [0.05, -0.05, 0.0];
    // int_{B_r} 3 s^2 over int_{B_R} s^2 |x - c|^2 / (R - r)^2.
    let (r, big_r): (f64, f64) = (0.25, 0.5);
    let expected = 5.0 * (r / big_r).powi(3) * ((big_r - r) / big_r).powi(2);
    let got = caccioppoli_ratio(&d, &u, &c, r, big_r, CaccioppoliVariant::General).unwrap();
    assert!((got / expected - 1.0).abs() < 0.03, "{got} vs {expected}");
    // With a = 0 both half-ball forms reduce to 3 s^2 |B_{R/2}| / (3/5 s^2 |B_R|).
    for variant in [CaccioppoliVariant::Half, CaccioppoliVariant::SmallA] {
        let got = caccioppoli_ratio(&d, &u, &c, r, big_r, variant).unwrap();
        assert!((got / 0.625 - 1.0).abs() < 0.03, "{variant:?}: {got}");
    }
    // mean |u - (u)_B|^2 / r^2 = 3/5 s^2 against |Du|^2 = 3 s^2.
    let got = poincare_ratio(&d, &u, &Ball::new(c.to_vec(), 0.5).unwrap(), 0.5).unwrap();
    assert!((got / 0.2 - 1.0).abs() < 0.03, "{got}");
}

#[test]
fn small_coefficient_variant_checks_its_precondition() {
    let g = cube(24);
    let a = CoefficientField::constant(&g, 5.0).unwrap();
    let d = DensityProfile::pure(Exponents::new(2.0, 2.4, 0.5).unwrap(), a).unwrap();
    let u = scaled_identity(&g, 0.5);
    assert!(caccioppoli_ratio(&d, &u, &[0.0; 3], 0.2, 0.4, CaccioppoliVariant::SmallA).is_err());
    assert!(caccioppoli_ratio(&d, &u, &[0.0; 3], 0.4, 0.2, CaccioppoliVariant::General).is_err());
}

#[test]
fn hedgehog_reverse_holder_ratio_matches_the_radial_integral() {
    let g = cube(96);
    let d = dirichlet(&g);
    let u = hedgehog(&g, &[0.0; 3]).unwrap();
    let ball = Ball::new(vec![0.0; 3], 0.45).unwrap();
    for delta in [0.0f64, 0.2] {
        let expected = 4.0 / 3.0 * (3.0 / (1.0 - 2.0 * delta)).powf(1.0 / (1.0 + delta));
        let got = higher_integrability_ratio(&d, &u, &ball, delta).unwrap();
        assert!((got / expected - 1.0).abs() < 0.1, "delta {delta}: {got} vs {expected}");
    }
}

#[test]
fn morrey_exponents_of_reference_fields() {
    // The discrete hedgehog loses an O(h) amount of energy at its core, which
    // biases the slope upward on coarse lattices (about 1.07 at 64 nodes).
    let g = cube(128);
    let d = dirichlet(&g);
    let radii: Vec<f64> = (0..8).map(|k| 0.1 * 10f64.powf(k as f64 / 7.0)).collect();
    let slope = |u: &GridField| match morrey_decay_fit(&d, u, &[0.0; 3], &radii).unwrap() {
        MorreyFit::Fitted { exponent, .. } => exponent,
        MorreyFit::NoEnergy => panic!("no energy"),
    };
    let hedge = slope(&hedgehog(&g, &[0.0; 3]).unwrap());
    assert!((hedge - 1.0).abs() < 0.05, "hedgehog slope {hedge}");
    let lin = slope(&scaled_identity(&g, 0.4));
    assert!((lin - 3.0).abs() < 0.05, "affine slope {lin}");
    let constant = GridField::constant(g.clone(), &[1.0, 0.0, 0.0]).unwrap();
    assert_eq!(morrey_decay_fit(&d, &constant, &[0.0; 3], &radii).unwrap(), MorreyFit::NoEnergy);
    assert!(morrey_decay_fit(&d, &constant, &[0.0; 3], &[0.5, 0.4, 0.3, 0.2]).is_err());
}
