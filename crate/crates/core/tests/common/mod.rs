#![allow(dead_code)]

use kahler_probe::acs::{conjugate, exp_map, random_tangent, validate_j, OrthoComplexStructure};
use kahler_probe::linalg::{random_special_orthogonal, seeded_rng, Mat};

/// Generator of a cyclic group of order `k` together with the orbit of a
/// structure at distance `radius` from one of its fixed points.
pub struct CyclicOrbit {
    pub generator: Mat,
    pub fixed: OrthoComplexStructure,
    pub orbit: Vec<OrthoComplexStructure>,
}

impl CyclicOrbit {
    /// `h^m` for every group element.
    pub fn elements(&self) -> Vec<Mat> {
        let k = self.orbit.len();
        let mut out = Vec::with_capacity(k);
        let mut h = Mat::identity(4, 4);
        for _ in 0..k {
            out.push(h.clone());
            h = &h * &self.generator;
        }
        out
    }
}

/// Rotation by `2π/k` in a coordinate plane, moved to a random frame. The
/// structure pairing that plane with itself commutes with the rotation.
pub fn cyclic_orbit(k: usize, seed: u64, radius: f64) -> CyclicOrbit {
    let theta = std::f64::consts::TAU / k as f64;
    let mut rot = Mat::identity(4, 4);
    rot[(0, 0)] = theta.cos();
    rot[(2, 2)] = theta.cos();
    rot[(2, 0)] = theta.sin();
    rot[(0, 2)] = -theta.sin();
    let mut jf = Mat::zeros(4, 4);
    jf[(2, 0)] = 1.0;
    jf[(0, 2)] = -1.0;
    jf[(3, 1)] = 1.0;
    jf[(1, 3)] = -1.0;
    let q = random_special_orthogonal(4, &mut seeded_rng(seed));
    let generator = &q * rot * q.transpose();
    let fixed = validate_j(&(&q * jf * q.transpose()), 1e-12).unwrap();
    let phi = random_tangent(&fixed, seed + 1, radius).unwrap();
    let start = exp_map(&fixed, &phi, 1.0).unwrap();
    let mut orbit = Vec::with_capacity(k);
    let mut h = Mat::identity(4, 4);
    for _ in 0..k {
        orbit.push(conjugate(&h, &start).unwrap());
        h = &h * &generator;
    }
    CyclicOrbit {
        generator,
        fixed,
        orbit,
    }
}

pub fn crate_dir() -> std::path::PathBuf {
    std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}
