use std::f64::consts::FRAC_PI_2;

use dphase::energy::Exponents;
use dphase::grid::{unit_ball_volume, Ball, CoefficientField, Grid};
use dphase::measure::{
    axiom_probe, capacity_estimate, covering_cost, h_phi_all, hausdorff_comparison, hausdorff_estimate,
    hausdorff_sweep, random_covering, singular_set_measures, verify_tent_trend, BoxDomain, CapacityDomain,
    CapacityTarget, CostVariant, DoublePhasePhi, FnPhi, Musielak, PointCloudSet, PowerPhi,
};
use dphase::regularity::{Classification, RegularityReport};
use dphase::solver::SolveOptions;
use dphase::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cube(n: usize) -> BoxDomain {
    BoxDomain::cube(n, -1.0, 1.0).unwrap()
}

fn power(p: f64, n: usize) -> PowerPhi {
    PowerPhi::new(p, cube(n)).unwrap()
}

/// Double-phase function with `a(x) = |x_1|^alpha` on the square.
fn flagship(q: f64, alpha: f64) -> DoublePhasePhi {
    let g = Grid::cube(2, -1.0, 1.0, 65).unwrap();
    let a = CoefficientField::from_fn_with_seminorm(&g, alpha, 1.0, move |x| x[0].abs().powf(alpha)).unwrap();
    DoublePhasePhi::new(Exponents::growth(2.0, q, alpha).unwrap(), a, 0.0).unwrap()
}

#[test]
fn unit_segment_has_measure_half_pi() {
    let set = PointCloudSet::segment(vec![-0.5, 0.0], vec![0.5, 0.0], 1025).unwrap();
    let e = hausdorff_estimate(&power(1.0, 2), &set, 1.0 / 128.0, CostVariant::Integral).unwrap();
    assert!((e / FRAC_PI_2 - 1.0).abs() < 0.1, "estimate {e}");
}

#[test]
fn point_measure_vanishes_with_kappa() {
    let phi = power(2.0, 3);
    let point = PointCloudSet::point(vec![0.1, 0.2, -0.3]);
    let k: f64 = 1.0 / 128.0;
    let e = hausdorff_estimate(&phi, &point, k, CostVariant::Integral).unwrap();
    assert!(e < 1e-2);
    // One ball of radius kappa costs omega_3 kappa^(3 - 2).
    assert!(e <= unit_ball_volume(3) * k * (1.0 + 1e-12));
}

#[test]
fn sweep_rows_and_running_minima() {
    let set = PointCloudSet::segment(vec![-0.2, 0.1], vec![0.3, -0.1], 257).unwrap();
    let sweep = hausdorff_sweep(&power(1.5, 2), &set, &[0.2, 0.1, 0.05, 0.025]).unwrap();
    assert!(sweep.rows.windows(2).all(|w| w[0].kappa > w[1].kappa));
    for r in sweep.rows.iter().chain(&sweep.enforced) {
        assert!(r.estimate_minus <= r.estimate && r.estimate <= r.estimate_plus);
    }
    // Enforced estimates never decrease as kappa shrinks.
    assert!(sweep.enforced.windows(2).all(|w| w[1].estimate >= w[0].estimate));
    let csv = sweep.to_csv();
    assert!(csv.starts_with("kappa,estimate_minus,estimate,estimate_plus\n"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn estimates_are_subadditive() {
    let phi = power(1.0, 2);
    let a = PointCloudSet::segment(vec![-0.6, 0.0], vec![-0.1, 0.0], 257).unwrap();
    let b = PointCloudSet::segment(vec![0.1, 0.3], vec![0.5, -0.2], 257).unwrap();
    let k = 0.05;
    let ea = hausdorff_estimate(&phi, &a, k, CostVariant::Integral).unwrap();
    let eb = hausdorff_estimate(&phi, &b, k, CostVariant::Integral).unwrap();
    let eu = hausdorff_estimate(&phi, &a.union(&b).unwrap(), k, CostVariant::Integral).unwrap();
    assert!(eu <= (ea + eb) * 1.05, "{eu} > {ea} + {eb}");
}

#[test]
fn variant_chain_on_random_coverings() {
    let phi = flagship(2.4, 0.5);
    let bound = phi.declared().c_d.unwrap();
    let set = PointCloudSet::segment(vec![-0.3, -0.3], vec![0.3, 0.3], 121).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let c = random_covering(&phi, &set, 0.1, &mut rng).unwrap();
        assert!(c.certifies(&set));
        let [lo, mid, hi] = CostVariant::ALL.map(|v| covering_cost(&phi, &c, v).unwrap());
        assert!(lo <= mid && mid <= hi && hi <= bound * lo);
    }
    let report = hausdorff_comparison(&phi, &set, &[0.1, 0.05], 200, 7).unwrap();
    assert!(report.chain_holds);
    assert!(report.observed_constant <= report.bound);
    assert!(report.constant_spread <= 1.2, "spread {}", report.constant_spread);
}

#[test]
fn x_independent_costs_coincide() {
    let phi = FnPhi::new(cube(2), (2.0, 3.0), |_, t| t * t + t * t * t);
    let (lo, mid, hi) = h_phi_all(&phi, &Ball::new(vec![0.2, 0.1], 0.3).unwrap()).unwrap();
    assert!((hi - lo).abs() <= 1e-12 * hi && (mid - lo).abs() <= 1e-12 * hi);
}

#[test]
fn comparison_rejects_a_discontinuous_weight() {
    let phi = FnPhi::new(cube(2), (2.0, 2.4), |x, t| t * t + if x[0] > 0.0 { t.powf(2.4) } else { 0.0 })
        .with_critical_points(vec![vec![0.0, 0.0]]);
    let set = PointCloudSet::point(vec![0.0, 0.0]);
    let err = hausdorff_comparison(&phi, &set, &[0.1], 10, 1).unwrap_err();
    assert!(matches!(err, Error::Axiom(_)), "{err}");
}

#[test]
fn probe_flags_a_gap_beyond_the_hoelder_exponent() {
    let ok = axiom_probe(&flagship(2.5, 0.5), 200, 5).unwrap();
    assert!(ok.controllo.passed, "{:?}", ok.controllo);
    let bad = axiom_probe(&flagship(3.0, 0.5), 200, 5).unwrap();
    assert!(!bad.controllo.passed);
    // The worst ratio keeps growing on smaller balls crossing {x_1 = 0}.
    let bands = &bad.controllo.bands;
    assert!(bands.last().unwrap().1 > 10.0 * bands[0].1);
}

fn dirichlet_phi(n: usize, p: f64, half: f64) -> PowerPhi {
    PowerPhi::new(p, BoxDomain::cube(n, -half, half).unwrap()).unwrap()
}

#[test]
fn capacity_is_monotone_in_the_compact_set() {
    let phi = dirichlet_phi(2, 2.0, 1.0);
    let domain = CapacityDomain::Ball(Ball::new(vec![0.0, 0.0], 1.0).unwrap());
    let opts = SolveOptions::default();
    let small = CapacityTarget::Ball(Ball::new(vec![0.1, 0.0], 0.2).unwrap());
    let large =
        CapacityTarget::Union(vec![small.clone(), CapacityTarget::Ball(Ball::new(vec![-0.2, 0.1], 0.3).unwrap())]);
    let a = capacity_estimate(&phi, &small, &domain, 65, &opts).unwrap().bound;
    let b = capacity_estimate(&phi, &large, &domain, 65, &opts).unwrap().bound;
    assert!(a > 0.0 && a <= b + 1e-8, "{a} vs {b}");
    let empty = capacity_estimate(&phi, &CapacityTarget::Empty, &domain, 65, &opts).unwrap();
    assert_eq!(empty.bound, 0.0);
}

#[test]
fn capacity_scales_with_exponent_n_minus_p() {
    let p = 1.5;
    let opts = SolveOptions { grad_tol: 1e-10, energy_tol: 1e-16, ..SolveOptions::default() };
    let run = |scale: f64| {
        let phi = dirichlet_phi(2, p, scale);
        let domain = CapacityDomain::Ball(Ball::new(vec![0.0, 0.0], scale).unwrap());
        let target = CapacityTarget::Ball(Ball::new(vec![0.0, 0.0], 0.4 * scale).unwrap());
        capacity_estimate(&phi, &target, &domain, 41, &opts).unwrap().bound
    };
    let ratio = run(0.5) / run(1.0);
    assert!((ratio / 0.5f64.powf(2.0 - p) - 1.0).abs() < 1e-6, "ratio {ratio}");
}

#[test]
fn capacity_target_must_clear_the_boundary() {
    let phi = dirichlet_phi(2, 2.0, 1.0);
    let domain = CapacityDomain::Ball(Ball::new(vec![0.0, 0.0], 1.0).unwrap());
    let target = CapacityTarget::Points(PointCloudSet::point(vec![1.0, 0.0]));
    let err = capacity_estimate(&phi, &target, &domain, 33, &SolveOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Geometry(_)));
}

#[test]
fn tent_bounds_decay_for_a_point() {
    let r = verify_tent_trend(&power(2.0, 3), &PointCloudSet::point(vec![0.0; 3]), 3, 0.3, 1).unwrap();
    assert!(r.passed, "{:?}", r.decay_factors);
    assert!((r.bounds[0] - r.levels[0].tent_energy).abs() < 1e-12);
}

#[test]
fn tent_bounds_decrease_for_a_segment_in_space() {
    let set = PointCloudSet::segment(vec![-0.1, 0.0, 0.0], vec![0.1, 0.0, 0.0], 1201).unwrap();
    let r = verify_tent_trend(&power(2.0, 3), &set, 3, 0.2, 1).unwrap();
    assert!(r.decay_factors.iter().all(|f| *f < 1.0), "{:?}", r.decay_factors);
}

#[test]
fn tent_trend_needs_superlinear_growth_and_control() {
    let set = PointCloudSet::point(vec![0.0, 0.0]);
    assert!(matches!(verify_tent_trend(&power(1.0, 2), &set, 3, 0.3, 1), Err(Error::Scope(_))));
    let jump = FnPhi::new(cube(2), (2.0, 2.4), |x, t| t * t + if x[1] > 0.0 { t.powf(2.4) } else { 0.0 })
        .with_critical_points(vec![vec![0.0, 0.0]]);
    assert!(matches!(verify_tent_trend(&jump, &set, 3, 0.3, 1), Err(Error::Axiom(_))));
}

fn flagged(point: Vec<f64>) -> RegularityReport {
    RegularityReport {
        point,
        radii: vec![0.2, 0.1],
        excluded_radii: Vec::new(),
        excess_values: vec![1.0, 1.0],
        intrinsic_quotients: vec![6.0, 6.0],
        classification: Classification::Singular,
        epsilon_used: 0.1,
        floor: 0.0,
        limsup_estimate: Some(6.0),
        epsilon_sweep: Vec::new(),
        delta_g_probe: None,
        sigma_g_probe: None,
    }
}

#[test]
fn singular_measures_split_by_phase() {
    let g = Grid::cube(3, -1.0, 1.0, 33).unwrap();
    let a = CoefficientField::from_fn_with_seminorm(&g, 0.5, 1.0, |x| x[0].abs().sqrt()).unwrap();
    let e = Exponents::new(2.0, 2.4, 0.5).unwrap();
    let kappas = [0.2, 0.1, 0.05, 0.025];
    let none = singular_set_measures(&[], &e, &a, None, &kappas).unwrap();
    assert!(none.p_split.sweep.rows.iter().all(|r| r.estimate == 0.0) && none.q_split.points.is_empty());
    let reports = [flagged(vec![0.0, 0.0, 0.0]), flagged(vec![0.5, 0.0, 0.0])];
    let m = singular_set_measures(&reports, &e, &a, Some(0.2), &kappas).unwrap();
    assert_eq!(m.p_split.points.len(), 1);
    assert_eq!(m.q_split.points.len(), 1);
    assert!(m.p_split.decays && m.q_split.decays);
    assert!(m.q_split.sweep.rows.last().unwrap().estimate < m.q_split.sweep.rows[0].estimate);
    let err = singular_set_measures(&reports, &e, &a, Some(0.5), &kappas).unwrap_err();
    assert!(matches!(err, Error::Scope(_)));
    // Kappas that do not fit the domain around the flagged points are dropped.
    let near = singular_set_measures(&[flagged(vec![0.9, 0.0, 0.0])], &e, &a, Some(0.0), &[0.2, 0.05]).unwrap();
    assert_eq!(near.dropped_kappas, vec![0.2]);
}

#[test]
fn capacity_estimate_of_a_point_cloud() {
    // Points pin their nearest nodes; capacity of two points exceeds one.
    let phi = dirichlet_phi(2, 1.5, 1.0);
    let domain = CapacityDomain::Box(cube(2));
    let opts = SolveOptions::default();
    let one = CapacityTarget::Points(PointCloudSet::point(vec![0.0, 0.0]));
    let two = CapacityTarget::Points(PointCloudSet::new(vec![vec![0.0, 0.0], vec![0.5, 0.0]], 0.0).unwrap());
    let a = capacity_estimate(&phi, &one, &domain, 33, &opts).unwrap().bound;
    let b = capacity_estimate(&phi, &two, &domain, 33, &opts).unwrap().bound;
    assert!(a > 0.0 && b > a);
}
