use std::fmt;
use std::str::FromStr;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use super::chart::{Christoffel, ManifoldChart};
use crate::acs::canonical_j;
use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogName {
    FlatTorus4,
    RoundSphere2,
    RoundSphere4,
    FubiniStudyCp2,
    ProductS2S2,
}

impl CatalogName {
    pub const ALL: [CatalogName; 5] = [
        CatalogName::FlatTorus4,
        CatalogName::RoundSphere2,
        CatalogName::RoundSphere4,
        CatalogName::FubiniStudyCp2,
        CatalogName::ProductS2S2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CatalogName::FlatTorus4 => "flat_torus_4",
            CatalogName::RoundSphere2 => "round_sphere_2",
            CatalogName::RoundSphere4 => "round_sphere_4",
            CatalogName::FubiniStudyCp2 => "fubini_study_cp2",
            CatalogName::ProductS2S2 => "product_s2_s2",
        }
    }
}

impl fmt::Display for CatalogName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CatalogName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CatalogName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownManifold(s.to_string()))
    }
}

/// Looks a chart up by its string tag.
pub fn catalog_by_name(name: &str) -> Result<ManifoldChart> {
    Ok(catalog(name.parse()?))
}

pub fn catalog(name: CatalogName) -> ManifoldChart {
    match name {
        CatalogName::FlatTorus4 => ManifoldChart::new(name.as_str(), vec![(0.0, 1.0); 4], |_| Mat::identity(4, 4))
            .with_christoffel(|_| Christoffel::zeros(4))
            .periodic(),
        CatalogName::RoundSphere2 => stereographic_sphere(name, 2),
        CatalogName::RoundSphere4 => stereographic_sphere(name, 4),
        CatalogName::FubiniStudyCp2 => ManifoldChart::new(name.as_str(), vec![(-0.5, 0.5); 4], fubini_study_metric)
            .with_christoffel(fubini_study_christoffel)
            .with_complex_structure(canonical_j(2).expect("n = 2").into_matrix()),
        CatalogName::ProductS2S2 => ManifoldChart::new(name.as_str(), vec![(-2.0, 2.0); 4], |x| {
            let mut g = Mat::zeros(4, 4);
            for b in [0, 2] {
                let c = conformal_factor(&x[b..b + 2]);
                g[(b, b)] = c;
                g[(b + 1, b + 1)] = c;
            }
            g
        })
        .with_christoffel(|x| {
            let mut out = Christoffel::zeros(4);
            for b in [0, 2] {
                add_conformal_block(&mut out, &x[b..b + 2], b);
            }
            out
        }),
    }
}

/// `4/(1+|x|²)²`, the stereographic round metric of radius 1.
fn conformal_factor(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    4.0 / ((1.0 + r2) * (1.0 + r2))
}

/// Christoffels of `e^{2u}δ` with `u = ln 2 − ln(1+|x|²)` on the coordinate
/// block starting at `offset`.
fn add_conformal_block(out: &mut Christoffel, x: &[f64], offset: usize) {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let du: Vec<f64> = x.iter().map(|v| -2.0 * v / (1.0 + r2)).collect();
    let d = x.len();
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                let mut v = 0.0;
                if i == k {
                    v += du[j];
                }
                if j == k {
                    v += du[i];
                }
                if i == j {
                    v -= du[k];
                }
                out.set(offset + k, offset + i, offset + j, v);
            }
        }
    }
}

fn stereographic_sphere(name: CatalogName, d: usize) -> ManifoldChart {
    ManifoldChart::new(name.as_str(), vec![(-2.0, 2.0); d], move |x| {
        Mat::identity(d, d) * conformal_factor(x)
    })
    .with_christoffel(move |x| {
        let mut out = Christoffel::zeros(d);
        add_conformal_block(&mut out, x, 0);
        out
    })
}

fn complex_coords(x: &[f64]) -> [Complex<f64>; 2] {
    [Complex::new(x[0], x[1]), Complex::new(x[2], x[3])]
}

/// Real form of the hermitian metric `H_ab = ((1+|z|²)δ_ab − z̄_a z_b)/(1+|z|²)²`
/// on `ℂ² ≅ ℝ⁴` with `z_a = x_{2a} + i x_{2a+1}`.
fn fubini_study_metric(x: &[f64]) -> Mat {
    let z = complex_coords(x);
    let s = 1.0 + z[0].norm_sqr() + z[1].norm_sqr();
    let mut g = Mat::zeros(4, 4);
    for a in 0..2 {
        for b in 0..2 {
            let delta = if a == b { s } else { 0.0 };
            let h = (Complex::new(delta, 0.0) - z[a].conj() * z[b]) / (s * s);
            g[(2 * a, 2 * b)] = h.re;
            g[(2 * a + 1, 2 * b + 1)] = h.re;
            g[(2 * a, 2 * b + 1)] = h.im;
            g[(2 * a + 1, 2 * b)] = -h.im;
        }
    }
    g
}

/// The only nonzero complex symbols are
/// `Γ^a_bc = −(δ^a_b z̄_c + δ^a_c z̄_b)/(1+|z|²)`; real symbols follow by
/// evaluating the bilinear map on real basis vectors.
fn fubini_study_christoffel(x: &[f64]) -> Christoffel {
    let z = complex_coords(x);
    let s = 1.0 + z[0].norm_sqr() + z[1].norm_sqr();
    let basis = |i: usize| -> [Complex<f64>; 2] {
        let unit = if i.is_multiple_of(2) {
            Complex::new(1.0, 0.0)
        } else {
            Complex::new(0.0, 1.0)
        };
        let mut v = [Complex::new(0.0, 0.0); 2];
        v[i / 2] = unit;
        v
    };
    let mut out = Christoffel::zeros(4);
    for i in 0..4 {
        let u = basis(i);
        let zu = z[0].conj() * u[0] + z[1].conj() * u[1];
        for j in 0..4 {
            let w = basis(j);
            let zw = z[0].conj() * w[0] + z[1].conj() * w[1];
            for a in 0..2 {
                let c = -(u[a] * zw + w[a] * zu) / s;
                out.set(2 * a, i, j, c.re);
                out.set(2 * a + 1, i, j, c.im);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    #[test]
    fn names_round_trip() {
        for c in CatalogName::ALL {
            assert_eq!(c.as_str().parse::<CatalogName>().unwrap(), c);
            assert_eq!(catalog(c).name(), c.as_str());
        }
        assert!(matches!(
            catalog_by_name("klein_bottle"),
            Err(Error::UnknownManifold(_))
        ));
    }

    #[test]
    fn torus_metric_is_identity() {
        let c = catalog(CatalogName::FlatTorus4);
        assert_eq!(c.metric(&[0.3, 5.0, -2.0, 0.9]).unwrap(), Mat::identity(4, 4));
    }

    #[test]
    fn fubini_study_is_identity_at_origin() {
        let c = catalog(CatalogName::FubiniStudyCp2);
        assert_eq!(c.metric(&[0.0; 4]).unwrap(), Mat::identity(4, 4));
    }

    #[test]
    fn analytic_christoffels_match_finite_differences() {
        for c in CatalogName::ALL {
            let diag = catalog(c).verify(100, 17).unwrap();
            assert!(diag.max_asymmetry < 1e-12, "{c}");
            assert!(diag.max_christoffel_gap < 1e-5, "{c}: {}", diag.max_christoffel_gap);
        }
    }

    #[test]
    fn multiplication_by_i_is_an_isometry_of_fubini_study() {
        let c = catalog(CatalogName::FubiniStudyCp2);
        let j = c.complex_structure().unwrap().clone();
        let g = c.metric(&[0.3, -0.4, 0.25, 0.2]).unwrap();
        assert!(max_abs(&(j.transpose() * &g * &j - &g)) < 1e-14);
    }
}
