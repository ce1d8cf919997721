mod common;

use common::{crate_dir, cyclic_orbit};
use kahler_probe::acs::*;
use kahler_probe::delta::DeltaConstant;
use kahler_probe::karcher::*;
use kahler_probe::linalg::{random_special_orthogonal, seeded_rng};
use proptest::prelude::*;
use rand::RngExt;

fn cluster(seed: u64, count: usize, spread: f64) -> (OrthoComplexStructure, Vec<OrthoComplexStructure>) {
    let center = random_j(2, seed).unwrap();
    let points = (0..count as u64)
        .map(|i| {
            let r = spread * (0.3 + 0.7 * ((i * 37 + seed) % 11) as f64 / 10.0);
            exp_map(&center, &random_tangent(&center, seed * 100 + i, r).unwrap(), 1.0).unwrap()
        })
        .collect();
    (center, points)
}

fn random_weights(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = seeded_rng(seed);
    let raw: Vec<f64> = (0..count).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn delta4() -> DeltaConstant {
    DeltaConstant {
        n: 2,
        delta: 1.5,
        epsilon_used: 0.2625,
        inj_used: 6.29,
    }
}

#[test]
fn two_point_mean_is_the_geodesic_midpoint() {
    let tol = 1e-10;
    for seed in 0..10 {
        let a = random_j(2, seed).unwrap();
        let b = exp_map(&a, &random_tangent(&a, seed + 50, 0.4).unwrap(), 1.0).unwrap();
        let set = WeightedSampleSet::uniform(vec![a.clone(), b.clone()]).unwrap();
        let m = karcher_mean(&set, tol, DEFAULT_MAX_ITER).unwrap();
        assert!(m.converged);
        let mid = exp_map(&a, &log_map(&a, &b).unwrap(), 0.5).unwrap();
        assert!(distance(&m.mean, &mid).unwrap() < 10.0 * tol);
    }
}

#[test]
fn shipped_fixture_mean_is_its_midpoint() {
    let dir = crate_dir().join("examples/data");
    let points: Vec<OrthoComplexStructure> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("two_points.json")).unwrap()).unwrap();
    let mid: OrthoComplexStructure =
        serde_json::from_str(&std::fs::read_to_string(dir.join("two_points_midpoint.json")).unwrap()).unwrap();
    assert!((distance(&points[0], &points[1]).unwrap() - 0.4).abs() < 1e-12);
    let m = karcher_mean(&WeightedSampleSet::uniform(points).unwrap(), 1e-10, 100).unwrap();
    assert!(m.mean.max_abs_diff(&mid) < 1e-8);
}

#[test]
fn cyclic_group_fixes_the_mean() {
    let tol = 1e-10;
    for k in 3..=6 {
        let orbit = cyclic_orbit(k, 40 + k as u64, 0.5);
        let set = WeightedSampleSet::uniform(orbit.orbit.clone()).unwrap();
        assert!(check_convexity(&set, &delta4()).passed());
        let m = karcher_mean(&set, tol, DEFAULT_MAX_ITER).unwrap();
        assert!(m.converged);
        for h in orbit.elements() {
            let moved = conjugate(&h, &m.mean).unwrap();
            assert!(distance(&moved, &m.mean).unwrap() < 1e-8, "k = {k}");
        }
    }
}

#[test]
fn mean_is_independent_of_the_starting_point() {
    let orbit = cyclic_orbit(5, 9, 0.4);
    let set = WeightedSampleSet::uniform(orbit.orbit.clone()).unwrap();
    let reference = karcher_mean(&set, 1e-10, DEFAULT_MAX_ITER).unwrap().mean;
    for s in 0..5u64 {
        let start = exp_map(&orbit.fixed, &random_tangent(&orbit.fixed, 300 + s, 0.6).unwrap(), 1.0).unwrap();
        let m = karcher_mean_from(&set, start, 1e-10, DEFAULT_MAX_ITER).unwrap();
        assert!(m.converged);
        assert!(distance(&m.mean, &reference).unwrap() < 1e-8);
    }
}

#[test]
fn mean_is_conjugation_equivariant() {
    for seed in 0..5 {
        let (_, points) = cluster(seed, 6, 0.5);
        let weights = random_weights(seed, 6);
        let q = random_special_orthogonal(4, &mut seeded_rng(seed + 1000));
        let moved: Vec<_> = points.iter().map(|p| conjugate(&q, p).unwrap()).collect();
        let a = karcher_mean(&WeightedSampleSet::new(points, weights.clone()).unwrap(), 1e-10, 500).unwrap();
        let b = karcher_mean(&WeightedSampleSet::new(moved, weights).unwrap(), 1e-10, 500).unwrap();
        let a_moved = conjugate(&q, &a.mean).unwrap();
        assert!(distance(&a_moved, &b.mean).unwrap() < 1e-8);
    }
}

#[test]
fn energy_is_conjugation_invariant() {
    for seed in 0..20 {
        let (center, points) = cluster(seed, 5, 0.6);
        let weights = random_weights(seed, 5);
        let q = random_special_orthogonal(4, &mut seeded_rng(seed + 7));
        let y = exp_map(&center, &random_tangent(&center, seed + 3, 0.2).unwrap(), 1.0).unwrap();
        let moved: Vec<_> = points.iter().map(|p| conjugate(&q, p).unwrap()).collect();
        let e = karcher_energy(&y, &WeightedSampleSet::new(points, weights.clone()).unwrap()).unwrap();
        let e2 = karcher_energy(
            &conjugate(&q, &y).unwrap(),
            &WeightedSampleSet::new(moved, weights).unwrap(),
        )
        .unwrap();
        assert!((e - e2).abs() < 1e-9);
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let h = 1e-5;
    for seed in 0..50 {
        let (center, points) = cluster(seed, 2 + (seed as usize % 6), 0.7);
        let count = points.len();
        let set = WeightedSampleSet::new(points, random_weights(seed + 1, count)).unwrap();
        let y = exp_map(&center, &random_tangent(&center, seed + 2, 0.3).unwrap(), 1.0).unwrap();
        let psi = random_tangent(&y, seed + 4, 1.0).unwrap();
        let e = |t: f64| karcher_energy(&exp_map(&y, &psi, t).unwrap(), &set).unwrap();
        let fd = (e(h) - e(-h)) / (2.0 * h);
        let grad = karcher_gradient(&y, &set).unwrap();
        let exact = metric_inner(&grad, &psi).unwrap();
        assert!((fd - exact).abs() < 1e-6, "seed {seed}: {fd} vs {exact}");
    }
}

#[test]
fn checked_mean_refuses_spread_out_sets() {
    let a = canonical_j(2).unwrap();
    let far = exp_map(&a, &random_tangent(&a, 1, 3.5).unwrap(), 1.0).unwrap();
    let set = WeightedSampleSet::uniform(vec![a, far]).unwrap();
    assert!(matches!(
        karcher_mean_checked(&set, &delta4(), 1e-10, 100),
        Err(kahler_probe::Error::ConvexityViolation { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn descent_never_raises_energy(seed in 0u64..5000, count in 1usize..8, spread in 0.05f64..0.8) {
        let (_, points) = cluster(seed, count, spread);
        let set = WeightedSampleSet::new(points, random_weights(seed, count)).unwrap();
        let m = karcher_mean(&set, 1e-10, 500).unwrap();
        prop_assert!(m.converged);
        for w in m.energy_trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 8.0 * f64::EPSILON));
        }
        prop_assert!(karcher_gradient(&m.mean, &set).unwrap().norm() < 1e-10);
    }

    #[test]
    fn convex_sets_pass_the_checker(seed in 0u64..5000, count in 1usize..10) {
        let (_, points) = cluster(seed, count, 0.7);
        let set = WeightedSampleSet::uniform(points).unwrap();
        prop_assert!(check_convexity(&set, &delta4()).passed());
    }
}
