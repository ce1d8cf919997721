//! Extends the Fubini–Study structure from one point over a chart by
//! parallel transport, then checks it is parallel, integrable and has a
//! closed fundamental form. A small random perturbation breaks all three.
//!
//! cargo run --example global_structure

use kahler_probe::holonomy::{catalog, CatalogName};
use kahler_probe::prober::{auto_j, build_global_j, Certificates};

fn main() -> kahler_probe::Result<()> {
    let chart = catalog(CatalogName::FubiniStudyCp2);
    let p = [0.0; 4];
    let j = auto_j(&chart, &p)?;
    for grid in [9, 17, 33] {
        let field = build_global_j(&chart, &p, &j, grid, 4)?;
        let c = Certificates::compute(&field)?;
        println!(
            "grid {grid:>2}: path independence {:.1e} over {} comparisons, ∇J {:.2e}, Nijenhuis {:.2e}, dω {:.2e}",
            field.path_independence_residual(),
            field.path_comparisons(),
            c.nabla_j,
            c.nijenhuis,
            c.d_omega
        );
        if grid == 17 {
            let noisy = Certificates::compute(&field.perturbed(1e-2, 3)?)?;
            println!(
                "  perturbed: ∇J {:.2e}, Nijenhuis {:.2e}, dω {:.2e}",
                noisy.nabla_j, noisy.nijenhuis, noisy.d_omega
            );
        }
    }
    Ok(())
}
