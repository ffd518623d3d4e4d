//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary so
//! the lines always reach the test log; exits non-zero when a criterion
//! outside `EXPECTED_FAILURES` fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use dphase::energy::{
    energy_gradient, monotonicity_gap, regularized_energy, total_energy, v_map, DensityProfile, Exponents,
};
use dphase::fields::{affine, hedgehog};
use dphase::grid::{Ball, CoefficientField, Grid, GridField, Region};
use dphase::measure::{
    capacity_refinement, hausdorff_comparison, hausdorff_estimate, verify_tent_trend, BoxDomain, CapacityDomain,
    CapacityTarget, CostVariant, DoublePhasePhi, PointCloudSet, PowerPhi, SingularMeasureReport,
};
use dphase::regularity::{
    classify_grid, epsilon_regularity_test, morrey_decay_fit, probe_lattice, singular_indicator, Classification,
    MorreyFit, RegularityOptions,
};
use dphase::solver::{minimize_frozen_dirichlet, FrozenProblem, SolveOptions};
use dphase_cli::config::parse;
use dphase_cli::manifest::MANIFEST_FILE;
use dphase_cli::{cmd_pipeline, CliError, LoadedConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

/// Criteria known not to be attainable as stated; see the README.
const EXPECTED_FAILURES: &[u8] = &[];

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dirichlet(g: &Grid) -> DensityProfile {
    DensityProfile::pure(Exponents::new(2.0, 2.4, 0.5).unwrap(), CoefficientField::zero(g)).unwrap()
}

fn cube(nodes: usize) -> Grid {
    Grid::cube(3, -1.0, 1.0, nodes).unwrap()
}

fn scaled_identity(g: &Grid, s: f64) -> GridField {
    affine(g, &[0.1, -0.2, 0.3], &[s, 0.0, 0.0, 0.0, s, 0.0, 0.0, 0.0, s]).unwrap()
}

fn hedgehog_energy() -> Verdict {
    let started = Instant::now();
    // An even node count keeps the singularity off the lattice.
    let g = cube(64);
    let d = dirichlet(&g);
    let u = hedgehog(&g, &[0.0; 3]).unwrap();
    let region = Region::ball(&g, &Ball::new(vec![0.0; 3], 1.0).unwrap()).unwrap();
    let e = total_energy(&d, &u, &region).unwrap();
    let rel = (e - 8.0 * PI) / (8.0 * PI);
    let secs = started.elapsed().as_secs_f64();
    verdict(
        rel.abs() < 0.02 && secs < 60.0,
        format!("energy {e:.4} vs 8 pi = {:.4}, relative error {rel:+.4}, {secs:.1} s", 8.0 * PI),
    )
}

fn singular_detection() -> Verdict {
    let g = cube(64);
    let d = dirichlet(&g);
    let u = hedgehog(&g, &[0.0; 3]).unwrap();
    let opts = RegularityOptions::default();
    let origin = singular_indicator(&d, &u, &[0.0; 3], &[0.8, 0.5, 0.3, 0.2], &opts).unwrap();
    let worst = origin.intrinsic_quotients.iter().map(|q| (q / 6.0 - 1.0).abs()).fold(0.0, f64::max);
    let off = singular_indicator(&d, &u, &[0.5, 0.0, 0.0], &[0.3, 0.2, 0.1], &opts).unwrap();
    let last = *off.intrinsic_quotients.last().unwrap();
    let reports = classify_grid(&d, &u, &probe_lattice(&g, 7), &[0.3, 0.2, 0.1], &opts).unwrap();
    let flagged: Vec<&Vec<f64>> =
        reports.iter().filter(|r| r.classification == Classification::Singular).map(|r| &r.point).collect();
    let only_origin = flagged.len() == 1 && flagged[0].iter().all(|x| x.abs() < 1e-12);
    verdict(
        worst < 0.1 && last < 0.1 && only_origin,
        format!(
            "origin quotients {:?} (worst deviation {:.3}), quotient {last:.4} at |x0| = 0.5, {} flagged",
            origin.intrinsic_quotients.iter().map(|q| (q * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            worst,
            flagged.len()
        ),
    )
}

/// The criterion holds at a point when it holds on some resolved ball about it.
fn passes_somewhere(d: &DensityProfile, u: &GridField, x: &[f64], radii: &[f64], eps: f64) -> bool {
    let g = u.grid();
    radii.iter().any(|&r| {
        let ball = Ball::new(x.to_vec(), r).unwrap();
        g.contains_ball(&ball) && r >= 3.0 * g.spacing() && epsilon_regularity_test(d, u, &ball, eps).unwrap()
    })
}

fn epsilon_regularity() -> Verdict {
    let g = cube(40);
    let d = dirichlet(&g);
    let radii = [0.3, 0.2, 0.1];
    let probes: Vec<Vec<f64>> = probe_lattice(&g, 3);
    let smooth =
        [("constant", GridField::constant(g.clone(), &[0.0, 1.0, 0.0]).unwrap()), ("affine", scaled_identity(&g, 0.2))];
    let mut failures = Vec::new();
    for (name, u) in &smooth {
        let bad = probes.iter().filter(|x| !passes_somewhere(&d, u, x, &radii, 0.1)).count();
        if bad > 0 {
            failures.push(format!("{name} fails at {bad} probes"));
        }
    }
    let hg = cube(64);
    let hd = dirichlet(&hg);
    let h = hedgehog(&hg, &[0.0; 3]).unwrap();
    let eps_ladder = [0.01, 0.03, 0.1, 0.3, 1.0, 2.0];
    let hedgehog_passes: Vec<f64> = eps_ladder
        .iter()
        .copied()
        .filter(|&e| passes_somewhere(&hd, &h, &[0.0; 3], &[0.8, 0.5, 0.3, 0.2], e))
        .collect();
    if !hedgehog_passes.is_empty() {
        failures.push(format!("hedgehog passes at the origin for eps {hedgehog_passes:?}"));
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "{} probes per smooth field pass at eps 0.1; hedgehog fails for eps in {eps_ladder:?}",
                probes.len()
            )
        } else {
            failures.join("; ")
        },
    )
}

fn gradient_check() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pairs = [(2.0, 2.4), (2.0, 3.0), (2.5, 3.0)];
    let grid = Grid::cube(2, 0.0, 1.0, 6).unwrap();
    let region = Region::full(&grid);
    let mu = 1e-4;
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let (p, q) = pairs[trial % pairs.len()];
        let a: Vec<f64> = (0..grid.node_count()).map(|_| rng.gen_range(0.0..2.0)).collect();
        let d = DensityProfile::pure(
            Exponents::growth(p, q, 1.0).unwrap(),
            CoefficientField::from_values(&grid, 1.0, a).unwrap(),
        )
        .unwrap();
        let values: Vec<f64> = (0..grid.node_count() * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let field = GridField::new(grid.clone(), 3, values.clone()).unwrap();
        let g = energy_gradient(&d, &field, &region, mu).unwrap();
        let step = 1e-6;
        let fd: Vec<f64> = (0..values.len())
            .map(|i| {
                let shifted = |delta: f64| {
                    let mut v = values.clone();
                    v[i] += delta;
                    regularized_energy(&d, &GridField::new(grid.clone(), 3, v).unwrap(), &region, mu).unwrap()
                };
                (shifted(step) - shifted(-step)) / (2.0 * step)
            })
            .collect();
        let err: Vec<f64> = g.values().iter().zip(&fd).map(|(a, b)| a - b).collect();
        worst = worst.max(norm(&err) / norm(&fd));
    }
    verdict(worst < 1e-6, format!("worst relative error {worst:.2e} over 50 fields"))
}

fn v_identity_and_monotonicity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pairs = [(2.0, 2.4), (2.0, 3.0), (2.5, 3.0)];
    let grid = Grid::cube(1, 0.0, 1.0, 2).unwrap();
    let densities: Vec<Vec<(f64, DensityProfile)>> = pairs
        .iter()
        .map(|&(p, q)| {
            [0.0, 0.5, 2.0, 5.0]
                .iter()
                .map(|&a| {
                    let c = CoefficientField::constant(&grid, a).unwrap();
                    (a, DensityProfile::pure(Exponents::growth(p, q, 1.0).unwrap(), c).unwrap())
                })
                .collect()
        })
        .collect();
    let mut worst: f64 = 0.0;
    for k in 0..1_000_000 {
        let pi = k % pairs.len();
        let (p, q) = pairs[pi];
        let (a, d) = &densities[pi][(k / 3) % 4];
        let z: Vec<f64> = (0..6).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let h = d.eval_h(0, &z).unwrap();
        let v = norm(&v_map(&z, p)).powi(2) + a * norm(&v_map(&z, q)).powi(2);
        worst = worst.max((h - v).abs() / h.max(1.0));
    }
    let mut negative = 0;
    let mut smallest = f64::INFINITY;
    for k in 0..100_000 {
        let (_, d) = &densities[k % pairs.len()][(k / 3) % 4];
        let z1: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let z2: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let m = monotonicity_gap(d, 1, &z1, &z2, 1.0, 0.0).unwrap();
        smallest = smallest.min(m.inner);
        if m.inner < 0.0 {
            negative += 1;
        }
    }
    verdict(
        worst <= 1e-12 && negative == 0,
        format!("worst identity defect {worst:.2e} on 1e6 samples; smallest inner product {smallest:.3e} on 1e5 pairs"),
    )
}

fn hausdorff_specialization() -> Verdict {
    let kappa = 1.0 / 128.0;
    let square = BoxDomain::cube(2, -1.0, 1.0).unwrap();
    let length = PowerPhi::new(1.0, square).unwrap();
    let segment = PointCloudSet::segment(vec![-0.5, 0.0], vec![0.5, 0.0], 1025).unwrap();
    let seg = hausdorff_estimate(&length, &segment, kappa, CostVariant::Integral).unwrap();
    let rel = seg / (PI / 2.0) - 1.0;
    let p = PowerPhi::new(2.0, BoxDomain::cube(3, -1.0, 1.0).unwrap()).unwrap();
    let point =
        hausdorff_estimate(&p, &PointCloudSet::point(vec![0.1, 0.2, -0.3]), kappa, CostVariant::Integral).unwrap();
    verdict(
        rel.abs() < 0.1 && point < 1e-2,
        format!("segment {seg:.5} vs pi/2 (relative {rel:+.4}); point {point:.3e} with p = 2 in space"),
    )
}

fn comparison_chain() -> Verdict {
    let g = Grid::cube(2, -1.0, 1.0, 65).unwrap();
    let alpha = 0.5;
    let a = CoefficientField::from_fn_with_seminorm(&g, alpha, 1.0, move |x| x[0].abs().powf(alpha)).unwrap();
    let phi = DoublePhasePhi::new(Exponents::growth(2.0, 2.4, alpha).unwrap(), a, 0.0).unwrap();
    let set = PointCloudSet::segment(vec![-0.3, -0.3], vec![0.3, 0.3], 121).unwrap();
    let report = hausdorff_comparison(&phi, &set, &[0.1, 0.05], 200, 7).unwrap();
    let ratios: Vec<f64> = report.levels.iter().map(|l| l.worst_ratio).collect();
    verdict(
        report.chain_holds && report.constant_spread <= 1.2,
        format!(
            "chain holds: {}; worst plus/minus per level {ratios:.3?}, spread {:.3}, bound c = {:.3}",
            report.chain_holds, report.constant_spread, report.bound
        ),
    )
}

fn capacity_oracle() -> Verdict {
    let phi = PowerPhi::new(2.0, BoxDomain::cube(3, -1.0, 1.0).unwrap()).unwrap();
    let target = CapacityTarget::Ball(Ball::new(vec![0.0; 3], 0.5).unwrap());
    let domain = CapacityDomain::Ball(Ball::new(vec![0.0; 3], 1.0).unwrap());
    let opts = SolveOptions { max_iters: 20_000, grad_tol: 1e-7, ..SolveOptions::default() };
    let reports = capacity_refinement(&phi, &target, &domain, &[33, 65, 129], &opts).unwrap();
    let exact = 4.0 * PI;
    let errors: Vec<f64> = reports.iter().map(|r| r.bound / exact - 1.0).collect();
    let monotone = errors.windows(2).all(|w| w[1].abs() < w[0].abs());
    let last = *errors.last().unwrap();
    verdict(
        last.abs() < 0.05 && monotone,
        format!(
            "relative errors {:?} at meshes 33/65/129 (statuses {:?})",
            errors.iter().map(|e| (e * 1e4).round() / 1e4).collect::<Vec<_>>(),
            reports.iter().map(|r| r.status).collect::<Vec<_>>()
        ),
    )
}

fn tent_trend() -> Verdict {
    let phi = PowerPhi::new(2.0, BoxDomain::cube(3, -1.0, 1.0).unwrap()).unwrap();
    let report = verify_tent_trend(&phi, &PointCloudSet::point(vec![0.0; 3]), 3, 0.3, 1).unwrap();
    verdict(report.passed, format!("bounds {:.4?}, decay factors {:.3?}", report.bounds, report.decay_factors))
}

fn hedgehog_pipeline_config() -> Value {
    json!({
        "grid": {"dim": 3, "target_dim": 3, "nodes": 32, "lower": [-1, -1, -1], "upper": [1, 1, 1]},
        "exponents": {"p": 2.0, "q": 2.4, "alpha": 0.5, "delta": 0.2},
        "coefficient": {"kind": "dist_to_hyperplane", "normal": [1, 0, 0]},
        "initial_map": {"kind": "hedgehog", "center": [0, 0, 0]},
        "solver": {"max_iters": 50},
        "analyzer": {"radii": [0.3, 0.2], "probes_per_axis": 5},
        "measure": {"kappas": [0.2, 0.1, 0.05, 0.025, 0.0125], "capacity_mesh": 0},
        "seed": 3
    })
}

fn load(value: &Value) -> LoadedConfig {
    parse(&value.to_string(), Path::new("acceptance.json"), PathBuf::from(".")).unwrap()
}

fn singular_workflow() -> Verdict {
    let dir = tempfile::TempDir::new().unwrap();
    cmd_pipeline(&load(&hedgehog_pipeline_config()), dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("measure/measures.json")).unwrap();
    let report: SingularMeasureReport = serde_json::from_str(&text).unwrap();
    let est: Vec<f64> = report.p_split.sweep.rows.iter().map(|r| r.estimate).collect();
    let decays = !est.is_empty() && est.windows(2).all(|w| w[1] < w[0]);

    let mut wide = hedgehog_pipeline_config();
    wide["exponents"]["delta"] = json!(0.5);
    let other = tempfile::TempDir::new().unwrap();
    let scope = matches!(
        cmd_pipeline(&load(&wide), other.path()),
        Err(CliError::Stage { source: dphase::Error::Scope(_), .. })
    );
    verdict(
        decays && report.growth <= 3.0 && scope,
        format!(
            "{} flagged in the p-phase, estimates {:.4?} under q(1+delta) = {:.2}; scope error at delta 0.5: {scope}",
            report.p_split.points.len(),
            est,
            report.growth
        ),
    )
}

fn frozen_problems() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pairs = [(2.0, 2.4), (2.0, 2.5), (2.5, 3.0)];
    let opts = SolveOptions { max_iters: 400, ..SolveOptions::default() };
    let (mut max_ok, mut cmp_ok) = (0, 0);
    let mut tightest: f64 = 0.0;
    for trial in 0..20 {
        let (p, q) = pairs[trial % pairs.len()];
        let components = 2 + trial % 2;
        let g = Grid::cube(2, -1.0, 1.0, 17).unwrap();
        let c0 = rng.gen_range(0.0..1.0);
        let slope = rng.gen_range(-0.5..0.5);
        let a = CoefficientField::from_fn(&g, 1.0, move |x| (c0 + slope * x[0]).max(0.0)).unwrap();
        let d = DensityProfile::pure(Exponents::new(p, q, 1.0).unwrap(), a).unwrap();
        let amplitude = rng.gen_range(0.1..2.0);
        let modes: Vec<(f64, f64, f64)> = (0..components)
            .map(|_| (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(0.0..6.3)))
            .collect();
        let boundary = GridField::from_fn(g.clone(), components, |x, out| {
            for (o, (kx, ky, ph)) in out.iter_mut().zip(&modes) {
                *o = amplitude * (kx * x[0] + ky * x[1] + ph).sin();
            }
        })
        .unwrap();
        let frozen: Vec<f64> = (0..components).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let problem = FrozenProblem {
            ball: Ball::new(vec![rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)], 0.8).unwrap(),
            boundary_values: boundary,
            frozen_point_v: frozen,
            constrained: false,
        };
        let (_, rep) = minimize_frozen_dirichlet(&d, &problem, &opts).unwrap();
        let max = rep.max_principle.expect("unconstrained solves check the maximum principle");
        let cmp = rep.comparison.expect("frozen solves compare with the extension");
        max_ok += usize::from(max.holds && max.sup_solution <= max.bound);
        cmp_ok += usize::from(cmp.holds && cmp.solution_energy <= cmp.factor * cmp.competitor_energy);
        tightest = tightest.max(max.sup_solution / max.bound);
    }
    verdict(
        max_ok == 20 && cmp_ok == 20,
        format!("maximum principle {max_ok}/20, comparison {cmp_ok}/20, largest sup ratio {tightest:.3}"),
    )
}

fn morrey_fit() -> Verdict {
    let g = cube(128);
    let d = dirichlet(&g);
    let radii: Vec<f64> = (0..8).map(|k| 0.1 * 10f64.powf(k as f64 / 7.0)).collect();
    let slope = |u: &GridField| match morrey_decay_fit(&d, u, &[0.0; 3], &radii).unwrap() {
        MorreyFit::Fitted { exponent, .. } => exponent,
        MorreyFit::NoEnergy => f64::NAN,
    };
    let hedge = slope(&hedgehog(&g, &[0.0; 3]).unwrap());
    let lin = slope(&scaled_identity(&g, 0.4));
    verdict(
        (hedge - 1.0).abs() <= 0.05 && (lin - 3.0).abs() <= 0.05,
        format!("hedgehog exponent {hedge:.4}, affine exponent {lin:.4} (n = 3)"),
    )
}

fn outputs(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n != MANIFEST_FILE) {
                files.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn determinism() -> Verdict {
    let dir = tempfile::TempDir::new().unwrap();
    let mut c = hedgehog_pipeline_config();
    c["measure"]["capacity_mesh"] = json!(9);
    let config = dir.path().join("config.json");
    std::fs::write(&config, c.to_string()).unwrap();
    let mut runs = Vec::new();
    for (name, threads) in [("first", "1"), ("second", "1"), ("third", "8")] {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_dphase"))
            .args(["pipeline", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .args(["--threads", threads, "--seed", "5"])
            .output()
            .unwrap();
        if !status.status.success() {
            return verdict(false, format!("run {name} failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        runs.push(outputs(&out));
    }
    let differing: Vec<String> = runs[0]
        .iter()
        .filter(|(path, bytes)| runs[1].get(*path) != Some(bytes) || runs[2].get(*path) != Some(bytes))
        .map(|(path, _)| path.display().to_string())
        .collect();
    let same_files = runs[0].len() == runs[1].len() && runs[0].len() == runs[2].len();
    verdict(
        differing.is_empty() && same_files,
        format!(
            "{} CSV/JSON/binary outputs compared over two 1-thread runs and one 8-thread run; differing: {differing:?}",
            runs[0].len()
        ),
    )
}

type Criterion = (u8, &'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 13] = [
        (1, "hedgehog energy", hedgehog_energy),
        (2, "singular detection", singular_detection),
        (3, "epsilon-regularity consistency", epsilon_regularity),
        (4, "gradient correctness", gradient_check),
        (5, "V-identity and monotonicity", v_identity_and_monotonicity),
        (6, "Hausdorff specialization", hausdorff_specialization),
        (7, "comparison chain", comparison_chain),
        (8, "capacity oracle", capacity_oracle),
        (9, "tent-function capacity trend", tent_trend),
        (10, "singular-set measure workflow", singular_workflow),
        (11, "maximum principle and frozen comparison", frozen_problems),
        (12, "Morrey decay fit", morrey_fit),
        (13, "determinism", determinism),
    ];
    let filter: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let started = Instant::now();
        let v = run();
        let tag = if v.passed { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{tag}] {name}: {} ({:.1} s)", v.detail, started.elapsed().as_secs_f64());
        if !v.passed && !EXPECTED_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
