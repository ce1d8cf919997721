use kahler_probe::acs::*;
use kahler_probe::delta::{estimate_epsilon, estimate_injectivity, DeltaParams};
use kahler_probe::linalg::{gram_schmidt_frame, max_abs, random_special_orthogonal, seeded_rng, Mat};
use kahler_probe::Error;
use proptest::prelude::*;

fn random_orthogonal(dim: usize, seed: u64) -> Mat {
    random_special_orthogonal(dim, &mut seeded_rng(seed))
}

/// A pair at distance `d` from a random base.
fn pair(n: usize, seed: u64, d: f64) -> (OrthoComplexStructure, OrthoComplexStructure, TangentPhi) {
    let a = random_j(n, seed).unwrap();
    let phi = random_tangent(&a, seed ^ 0xabcd, d).unwrap();
    let b = exp_map(&a, &phi, 1.0).unwrap();
    (a, b, phi)
}

#[test]
fn exp_log_round_trip() {
    for n in [2, 3] {
        for seed in 0..100u64 {
            let d = 0.05 + 0.44 * (seed as f64 / 100.0);
            let (a, b, phi) = pair(n, seed, d);
            let back = log_map(&a, &b).unwrap();
            assert!(max_abs(&(back.matrix() - phi.matrix())) < 1e-9, "n={n} seed={seed}");
            let b2 = exp_map(&a, &back, 1.0).unwrap();
            assert!(b2.max_abs_diff(&b) < 1e-9);
        }
    }
}

#[test]
fn geodesics_travel_at_unit_speed() {
    for seed in 0..10 {
        let j = random_j(2, seed).unwrap();
        let phi = random_tangent(&j, seed + 100, 1.0).unwrap();
        for t in [0.1, 0.3] {
            let d = distance(&j, &exp_map(&j, &phi, t).unwrap()).unwrap();
            assert!((d - t).abs() < 1e-8, "{d} vs {t}");
        }
    }
}

#[test]
fn geodesic_acceleration_is_normal_to_the_space() {
    let h = 1e-3;
    for seed in 0..20u64 {
        let n = 2 + (seed % 2) as usize;
        let j = random_j(n, seed).unwrap();
        let phi = random_tangent(&j, seed + 7, 1.0).unwrap();
        let t = 0.1 + 0.05 * seed as f64;
        let at = |s: f64| exp_map(&j, &phi, s).unwrap().into_matrix();
        let accel = (at(t + h) - at(t) * 2.0 + at(t - h)) / (h * h);
        let here = exp_map(&j, &phi, t).unwrap();
        let tangential = project_tangent(&here, &accel).unwrap().norm();
        // The curve is curved in the ambient space; only the tangential part must vanish.
        assert!(accel.norm() > 0.1);
        assert!(tangential < 1e-5, "seed {seed}: {tangential}");
    }
}

#[test]
fn distance_is_a_metric_on_convex_triples() {
    for seed in 0..50u64 {
        let (a, b, _) = pair(2, seed, 0.3);
        let c = exp_map(&a, &random_tangent(&a, seed + 999, 0.25).unwrap(), 1.0).unwrap();
        let ab = distance(&a, &b).unwrap();
        let ba = distance(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-10);
        let bc = distance(&b, &c).unwrap();
        let ac = distance(&a, &c).unwrap();
        assert!(ac <= ab + bc + 1e-12);
        assert!(ab <= ac + bc + 1e-12);
    }
}

#[test]
fn conjugation_preserves_distance() {
    for seed in 0..100u64 {
        let (a, b, _) = pair(2 + (seed % 2) as usize, seed, 0.6);
        let q = random_orthogonal(a.dim(), seed + 5000);
        let before = distance(&a, &b).unwrap();
        let after = distance(&conjugate(&q, &a).unwrap(), &conjugate(&q, &b).unwrap()).unwrap();
        assert!((before - after).abs() < 1e-9);
    }
}

#[test]
fn gram_schmidt_change_of_metric_preserves_distance() {
    for seed in 0..50u64 {
        let (a, b, _) = pair(2, seed, 0.7);
        let mut rng = seeded_rng(seed + 77);
        let bmat = kahler_probe::linalg::gaussian_matrix(4, 4, &mut rng) + Mat::identity(4, 4) * 3.0;
        let g = bmat.transpose() * &bmat;
        let binv = bmat.clone().try_inverse().unwrap();
        // Structures compatible with g rather than the standard inner product.
        let ga = &binv * a.matrix() * &bmat;
        let gb = &binv * b.matrix() * &bmat;
        assert!(max_abs(&(ga.transpose() * &g * &ga - &g)) < 1e-8);
        let f = gram_schmidt_frame(&g).unwrap();
        assert!(max_abs(&(f.transpose() * &g * &f - Mat::identity(4, 4))) < 1e-10);
        let finv = f.clone().try_inverse().unwrap();
        let sa = validate_j(&(&finv * ga * &f), 1e-8).unwrap();
        let sb = validate_j(&(&finv * gb * &f), 1e-8).unwrap();
        let before = distance(&a, &b).unwrap();
        let after = distance(&sa, &sb).unwrap();
        assert!((before - after).abs() < 1e-8, "seed {seed}: {before} vs {after}");
    }
}

/// Jacobi-field length along a geodesic, from distances between nearby geodesics.
fn jacobi_length(j: &OrthoComplexStructure, phi: &TangentPhi, psi: &TangentPhi, t: f64) -> f64 {
    let s = 1e-4;
    let base = exp_map(j, phi, t).unwrap();
    let side = |sign: f64| {
        let v = phi.add(&psi.scaled(sign * s)).unwrap();
        distance(&base, &exp_map(j, &v, t).unwrap()).unwrap() / s
    };
    0.5 * (side(1.0) + side(-1.0))
}

#[test]
fn sectional_curvature_matches_geodesic_deviation() {
    // |J(t)| = t − K t³/6 + O(t⁵) for unit orthogonal φ, ψ.
    for seed in 0..5u64 {
        let j = random_j(2, seed).unwrap();
        let phi = random_tangent(&j, seed + 1, 1.0).unwrap();
        let raw = random_tangent(&j, seed + 2, 1.0).unwrap();
        let along = metric_inner(&raw, &phi).unwrap();
        let psi = raw.add(&phi.scaled(-along)).unwrap();
        let psi = psi.scaled(1.0 / psi.norm());
        let k_at = |t: f64| 6.0 * (t - jacobi_length(&j, &phi, &psi, t)) / t.powi(3);
        let oracle = (4.0 * k_at(0.05) - k_at(0.1)) / 3.0;
        let k = sectional_curvature(&j, &phi, &psi).unwrap();
        assert!((k - oracle).abs() < 1e-4, "seed {seed}: {k} vs {oracle}");
    }
}

#[test]
fn sectional_curvature_is_conjugation_invariant() {
    for seed in 0..20u64 {
        let j = random_j(2, seed).unwrap();
        let phi = random_tangent(&j, seed + 1, 1.0).unwrap();
        let psi = random_tangent(&j, seed + 2, 1.0).unwrap();
        let q = random_orthogonal(4, seed + 3);
        let k = sectional_curvature(&j, &phi, &psi).unwrap();
        let moved = sectional_curvature(
            &conjugate(&q, &j).unwrap(),
            &conjugate_tangent(&q, &phi).unwrap(),
            &conjugate_tangent(&q, &psi).unwrap(),
        )
        .unwrap();
        assert!((k - moved).abs() < 1e-9);
    }
}

#[test]
fn opposite_orientation_is_unreachable() {
    let j = canonical_j(2).unwrap();
    let mut r = Mat::identity(4, 4);
    r[(0, 0)] = -1.0;
    let flipped = conjugate(&r, &j).unwrap();
    assert_ne!(j.orientation(), flipped.orientation());
    assert!(matches!(log_map(&j, &flipped), Err(Error::ComponentMismatch { .. })));
}

#[test]
fn curvature_bound_is_seed_stable() {
    let a = estimate_epsilon(2, 2000, 1, true).unwrap();
    let b = estimate_epsilon(2, 2000, 2, true).unwrap();
    assert!(
        (a.epsilon - b.epsilon).abs() / a.epsilon < 0.02,
        "{} vs {}",
        a.epsilon,
        b.epsilon
    );
}

#[test]
fn injectivity_estimate_is_seed_stable() {
    let a = estimate_injectivity(2, 32, 0.01, 1).unwrap();
    let b = estimate_injectivity(2, 32, 0.01, 2).unwrap();
    assert!((a.inj_lower - b.inj_lower).abs() / a.inj_lower < 0.05);
}

#[test]
fn delta_is_seed_stable_and_convexity_compatible() {
    let a = DeltaParams::new(2, 3).estimate().unwrap();
    let b = DeltaParams::new(2, 4).estimate().unwrap();
    assert!((a.delta - b.delta).abs() / a.delta < 0.05);
    for d in [a, b] {
        assert!(d.delta > 0.0);
        assert!(d.is_convexity_compatible());
        assert!(d.delta <= d.inj_used / 2.0 + 1e-15);
        assert!(d.delta <= std::f64::consts::PI / (4.0 * d.epsilon_used.sqrt()) + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exp_stays_in_the_space(seed in 0u64..10_000, t in -2.0f64..2.0, n in 2usize..4) {
        let j = random_j(n, seed).unwrap();
        let phi = random_tangent(&j, seed + 1, 1.0).unwrap();
        let m = exp_map(&j, &phi, t).unwrap().into_matrix();
        let id = Mat::identity(2 * n, 2 * n);
        prop_assert!(max_abs(&(&m * &m + &id)) < 1e-10);
        prop_assert!(max_abs(&(m.transpose() * &m - id)) < 1e-10);
    }

    #[test]
    fn distance_is_symmetric(seed in 0u64..10_000, d in 0.0f64..1.2) {
        let (a, b, _) = pair(2, seed, d);
        let ab = distance(&a, &b).unwrap();
        prop_assert!((ab - distance(&b, &a).unwrap()).abs() < 1e-10);
        prop_assert!((ab - d).abs() < 1e-8);
    }

    #[test]
    fn conjugation_is_an_isometry(seed in 0u64..10_000, d in 0.0f64..1.0) {
        let (a, b, _) = pair(3, seed, d);
        let q = random_orthogonal(6, seed + 1);
        let moved = distance(&conjugate(&q, &a).unwrap(), &conjugate(&q, &b).unwrap()).unwrap();
        prop_assert!((moved - distance(&a, &b).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn curvature_bound_dominates_exhaustive_plane_sampling() {
    let bound = estimate_epsilon(2, 2000, 5, true).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..100_000u64 {
        let j = random_j(2, seed).unwrap();
        let phi = random_tangent(&j, seed.wrapping_mul(31) + 1, 1.0).unwrap();
        let psi = random_tangent(&j, seed.wrapping_mul(31) + 2, 1.0).unwrap();
        if let Ok(k) = sectional_curvature(&j, &phi, &psi) {
            worst = worst.max(k);
        }
    }
    assert!(worst <= bound.epsilon, "{worst} > {}", bound.epsilon);
}
