use dphase::energy::{
    conjugate_h0, energy_gradient, monotonicity_gap, regularized_energy, v_equivalence_ratio, v_map, DensityProfile,
    Exponents,
};
use dphase::grid::{CoefficientField, Grid, GridField, Region};
use proptest::prelude::*;

const PAIRS: [(f64, f64); 3] = [(2.0, 2.4), (2.0, 3.0), (2.5, 3.0)];

fn density(grid: &Grid, p: f64, q: f64, coefficient: Vec<f64>) -> DensityProfile {
    let a = CoefficientField::from_values(grid, 1.0, coefficient).unwrap();
    DensityProfile::pure(Exponents::growth(p, q, 1.0).unwrap(), a).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn gradient_matches_central_differences(
        pair in 0usize..3,
        values in prop::collection::vec(-1.0f64..1.0, 6 * 6 * 3),
        coefficient in prop::collection::vec(0.0f64..2.0, 6 * 6),
    ) {
        let (p, q) = PAIRS[pair];
        let grid = Grid::cube(2, 0.0, 1.0, 6).unwrap();
        let d = density(&grid, p, q, coefficient);
        let region = Region::full(&grid);
        let mu = 1e-4;
        let field = GridField::new(grid.clone(), 3, values.clone()).unwrap();
        let g = energy_gradient(&d, &field, &region, mu).unwrap();
        let step = 1e-6;
        let mut fd = vec![0.0; values.len()];
        for (i, slot) in fd.iter_mut().enumerate() {
            let shifted = |delta: f64| {
                let mut v = values.clone();
                v[i] += delta;
                regularized_energy(&d, &GridField::new(grid.clone(), 3, v).unwrap(), &region, mu).unwrap()
            };
            *slot = (shifted(step) - shifted(-step)) / (2.0 * step);
        }
        let err: Vec<f64> = g.values().iter().zip(&fd).map(|(a, b)| a - b).collect();
        prop_assert!(norm(&err) < 1e-6 * norm(&fd), "relative error {}", norm(&err) / norm(&fd));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn density_is_the_sum_of_squared_v_maps(
        pair in 0usize..3,
        z in prop::collection::vec(-10.0f64..10.0, 6),
        a in 0.0f64..5.0,
    ) {
        let (p, q) = PAIRS[pair];
        let grid = Grid::cube(1, 0.0, 1.0, 2).unwrap();
        let d = density(&grid, p, q, vec![a, a]);
        let h = d.eval_h(0, &z).unwrap();
        let v = norm(&v_map(&z, p)).powi(2) + a * norm(&v_map(&z, q)).powi(2);
        prop_assert!((h - v).abs() <= 1e-12 * h.max(1.0));
    }

    #[test]
    fn density_derivative_is_monotone(
        pair in 0usize..3,
        z1 in prop::collection::vec(-3.0f64..3.0, 4),
        z2 in prop::collection::vec(-3.0f64..3.0, 4),
        a in 0.0f64..5.0,
    ) {
        let (p, q) = PAIRS[pair];
        let grid = Grid::cube(1, 0.0, 1.0, 2).unwrap();
        let d = density(&grid, p, q, vec![a, a]);
        let m = monotonicity_gap(&d, 1, &z1, &z2, 1.0, 0.0).unwrap();
        prop_assert!(m.inner >= 0.0);
    }

    #[test]
    fn v_equivalence_ratio_is_scale_invariant(
        z1 in prop::collection::vec(-3.0f64..3.0, 3),
        z2 in prop::collection::vec(-3.0f64..3.0, 3),
        t in 1.2f64..4.0,
        scale in 0.1f64..10.0,
    ) {
        prop_assume!(norm(&z1.iter().zip(&z2).map(|(a, b)| a - b).collect::<Vec<_>>()) > 1e-6);
        let r = v_equivalence_ratio(&z1, &z2, t).unwrap();
        let scaled = |z: &[f64]| z.iter().map(|v| v * scale).collect::<Vec<_>>();
        let rs = v_equivalence_ratio(&scaled(&z1), &scaled(&z2), t).unwrap();
        prop_assert!(r > 0.0 && r.is_finite());
        prop_assert!((r - rs).abs() <= 1e-10 * r);
    }

    #[test]
    fn young_inequality_with_the_conjugate(
        s in 0.0f64..5.0,
        t in 0.0f64..5.0,
        k in 0.01f64..0.99,
        p in 1.5f64..3.0,
        dq in 0.1f64..1.0,
        a0 in 0.0f64..2.0,
    ) {
        let q = p + dq;
        let h0 = s.powf(p) + a0 * s.powf(q);
        let rhs = k * h0 + k.powf(-1.0 / (p - 1.0)) * conjugate_h0(t, a0, p, q);
        prop_assert!(s * t <= rhs * (1.0 + 1e-9) + 1e-12, "{} > {}", s * t, rhs);
    }
}
