//! Geodesics, distances and curvature on the space of orthogonal complex
//! structures of ℝ⁶.
//!
//! cargo run --example structure_geometry

use kahler_probe::acs::{
    canonical_j, conjugate, distance, exp_map, log_map, metric_inner, random_j, random_tangent, sectional_curvature,
};
use kahler_probe::linalg::{random_special_orthogonal, seeded_rng};

fn main() -> kahler_probe::Result<()> {
    let j = canonical_j(3)?;
    let phi = random_tangent(&j, 1, 1.0)?;
    println!("unit tangent at the canonical structure, |φ| = {:.3}", phi.norm());

    // Walk along the geodesic and read the distance back.
    for t in [0.25, 0.5, 1.0, 1.5] {
        let jt = exp_map(&j, &phi, t)?;
        let back = log_map(&j, &jt)?;
        println!(
            "t = {t:<4} d(J, γ(t)) = {:.12}  |log| = {:.12}",
            distance(&j, &jt)?,
            back.norm()
        );
    }

    let q = random_special_orthogonal(6, &mut seeded_rng(2));
    let a = random_j(3, 3)?;
    let b = exp_map(&a, &random_tangent(&a, 4, 0.7)?, 1.0)?;
    let moved = distance(&conjugate(&q, &a)?, &conjugate(&q, &b)?)?;
    println!("d(a, b) = {:.12}, after conjugation {:.12}", distance(&a, &b)?, moved);

    // Sectional curvature of a few random orthonormal planes.
    for seed in 0..4 {
        let x = random_tangent(&j, 10 + seed, 1.0)?;
        let raw = random_tangent(&j, 20 + seed, 1.0)?;
        let y = raw.add(&x.scaled(-metric_inner(&raw, &x)?))?;
        let y = y.scaled(1.0 / y.norm());
        println!("K(plane {seed}) = {:.6}", sectional_curvature(&j, &x, &y)?);
    }
    Ok(())
}
