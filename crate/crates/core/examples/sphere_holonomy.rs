//! Parallel transport on round spheres: a geodesic triangle on S² turns
//! vectors by its area, and loops on S⁴ generate rotations that move every
//! orthogonal complex structure.
//!
//! cargo run --example sphere_holonomy

use kahler_probe::acs::{canonical_j, conjugate, distance};
use kahler_probe::holonomy::{
    catalog, holonomy_samples, loop_family, parallel_transport, CatalogName, LoopKind, PathPiece, SmoothPath,
};

fn main() -> kahler_probe::Result<()> {
    // Stereographic chart: the origin is a pole and the unit circle the
    // equator, so this triangle has two right angles and area α.
    let s2 = catalog(CatalogName::RoundSphere2);
    let alpha: f64 = 0.9;
    let triangle = SmoothPath::new(vec![
        PathPiece::Segment {
            from: vec![0.0, 0.0],
            to: vec![1.0, 0.0],
        },
        PathPiece::Arc {
            center: vec![0.0, 0.0],
            radius: 1.0,
            axes: [0, 1],
            start_angle: 0.0,
            end_angle: alpha,
        },
        PathPiece::Segment {
            from: vec![alpha.cos(), alpha.sin()],
            to: vec![0.0, 0.0],
        },
    ])?;
    for steps in [250, 1000, 4000] {
        let t = parallel_transport(&s2, &triangle, steps)?;
        let angle = t.matrix[(1, 0)].atan2(t.matrix[(0, 0)]);
        println!(
            "{steps:>5} steps: rotation {angle:.12}, area {alpha}, defect {:.1e}",
            t.defect
        );
    }

    let s4 = catalog(CatalogName::RoundSphere4);
    let p = [0.1, 0.2, -0.1, 0.0];
    let loops = loop_family(&s4, &p, LoopKind::CoordinateRectangles, 4, 0.5, 0)?;
    let samples = holonomy_samples(&s4, &p, &loops, 1000, 2)?;
    let j = canonical_j(2)?;
    println!("{} holonomy samples from {} loops", samples.len(), loops.len());
    for s in samples.iter().take(6) {
        let word: Vec<String> = s
            .word
            .iter()
            .map(|l| format!("{}{}", l.generator, if l.inverse { "'" } else { "" }))
            .collect();
        println!(
            "  word {:<6} moves J by {:.6}",
            word.join(" "),
            distance(&j, &conjugate(&s.matrix, &j)?)?
        );
    }
    Ok(())
}
