//! Estimates the curvature bound, injectivity radius and dichotomy radius
//! for structures on ℝ⁴ and ℝ⁶.
//!
//! cargo run --example delta_constant

use kahler_probe::delta::{delta_2n, estimate_epsilon, estimate_injectivity};

fn main() -> kahler_probe::Result<()> {
    for n in [2usize, 3] {
        let eps = estimate_epsilon(n, 2000, 7, true)?;
        let inj = estimate_injectivity(n, 32, 0.01, 7)?;
        let delta = delta_2n(n, &eps, &inj)?;
        println!(
            "2n = {}: max sampled curvature {:.6}, epsilon {:.6}, inj >= {:.4}, delta = {:.6}",
            2 * n,
            eps.max_sampled,
            eps.epsilon,
            inj.inj_lower,
            delta.delta
        );
        println!(
            "        convexity radius {:.6}, Karcher diameter limit {:.6}",
            delta.convexity_radius(),
            delta.karcher_diameter_limit()
        );
    }
    Ok(())
}
