//! Weighted Riemannian mean of a cluster of structures on ℝ⁴, after
//! checking that the cluster is small enough for the mean to be unique.
//!
//! cargo run --example karcher_average

use kahler_probe::acs::{distance, exp_map, random_j, random_tangent};
use kahler_probe::delta::DeltaParams;
use kahler_probe::karcher::{check_convexity, karcher_mean_checked, WeightedSampleSet};

fn main() -> kahler_probe::Result<()> {
    let center = random_j(2, 5)?;
    let points = (0..8u64)
        .map(|i| exp_map(&center, &random_tangent(&center, 100 + i, 0.3 + 0.05 * i as f64)?, 1.0))
        .collect::<kahler_probe::Result<Vec<_>>>()?;
    let weights: Vec<f64> = (1..=8).map(|i| i as f64 / 36.0).collect();
    let set = WeightedSampleSet::new(points, weights)?;

    let delta = DeltaParams::new(2, 0).estimate()?;
    println!("δ₄ = {:.6}", delta.delta);
    println!("convexity: {}", check_convexity(&set, &delta).describe());

    let m = karcher_mean_checked(&set, &delta, 1e-12, 500)?;
    println!(
        "mean after {} iterations, |grad| = {:.2e}, energy = {:.8}",
        m.iterations, m.final_grad_norm, m.energy
    );
    for (i, e) in m.energy_trace.iter().take(6).enumerate() {
        println!("  step {i}: E = {e:.12}");
    }
    println!(
        "distance from the generating center: {:.4}",
        distance(&m.mean, &center)?
    );
    Ok(())
}
