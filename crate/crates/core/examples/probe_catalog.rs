//! Runs the Kähler/obstruction prober on every four-dimensional manifold in
//! the catalog.
//!
//! cargo run --example probe_catalog

use kahler_probe::delta::DeltaParams;
use kahler_probe::holonomy::{catalog, CatalogName};
use kahler_probe::prober::{probe, replay_witness, JSpec, ProbeConfig};

fn main() -> kahler_probe::Result<()> {
    let delta = DeltaParams::new(2, 0).estimate()?;
    let config = ProbeConfig {
        refine: false,
        ..ProbeConfig::default()
    };
    println!("δ₄ = {:.6}", delta.delta);
    for name in [
        CatalogName::FlatTorus4,
        CatalogName::FubiniStudyCp2,
        CatalogName::ProductS2S2,
        CatalogName::RoundSphere4,
    ] {
        let chart = catalog(name);
        let p: Vec<f64> = chart.domain().iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        let v = probe(&chart, &p, &JSpec::Auto, &delta, &config)?;
        let spread = v.orbit.as_ref().map_or(f64::NAN, |o| o.max_distance);
        print!("{:<17} {:?}: orbit diameter {spread:.3e}", name.as_str(), v.kind);
        if let Some(c) = v.evidence.certificates {
            print!(", certificates max {:.2e}", c.max());
        }
        if let Some(w) = &v.obstruction {
            print!(
                ", loop {} replays at {:.4}",
                w.loop_index,
                replay_witness(&chart, w, &v.base_j)?
            );
        }
        if let Some(d) = &v.diagnostic {
            print!(", stopped: {}", d.detail);
        }
        println!();
    }
    Ok(())
}
