//! Estimation of the curvature bound ε, the injectivity radius, and the
//! dichotomy radius `δ = min(inj/2, π/(4√ε))` for structures on `ℝ^{2n}`.
//!
//! The space is homogeneous, so every estimate is taken at `canonical_j(n)`.
//! Random samples are drawn up front from the seed and then evaluated in
//! parallel, so results do not depend on the number of worker threads.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acs::{canonical_j, distance, exp_map, sectional_curvature, tangent_basis, TangentPhi};
use crate::error::{Error, Result};
use crate::linalg::{gaussian_vector, seeded_rng, Mat};

/// Multiplier applied to the largest curvature found.
pub const SAFETY_FACTOR: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    Sampled,
    Refined,
    UserOverride,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBound {
    pub n: usize,
    pub epsilon: f64,
    pub method: BoundMethod,
    pub samples: usize,
    /// Largest sectional curvature actually evaluated (before inflation).
    pub max_sampled: f64,
}

impl CurvatureBound {
    /// A bound supplied by the caller rather than estimated.
    pub fn user_override(n: usize, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidInput(format!(
                "curvature bound must be positive and finite, got {epsilon}"
            )));
        }
        Ok(CurvatureBound {
            n,
            epsilon,
            method: BoundMethod::UserOverride,
            samples: 0,
            max_sampled: 0.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectivityEstimate {
    pub n: usize,
    pub inj_lower: f64,
    pub directions_sampled: usize,
    pub resolution: f64,
    /// First failing march time per direction.
    pub first_failure: Vec<f64>,
    /// Largest `|distance − t|` seen before the first failure, over all directions.
    pub max_minimality_gap: f64,
}

impl InjectivityEstimate {
    /// An estimate supplied by the caller.
    pub fn user_supplied(n: usize, inj_lower: f64) -> Result<Self> {
        if !(inj_lower > 0.0) {
            return Err(Error::InvalidInput(format!(
                "injectivity radius must be positive, got {inj_lower}"
            )));
        }
        Ok(InjectivityEstimate {
            n,
            inj_lower,
            directions_sampled: 0,
            resolution: 0.0,
            first_failure: Vec::new(),
            max_minimality_gap: 0.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaConstant {
    pub n: usize,
    pub delta: f64,
    pub epsilon_used: f64,
    pub inj_used: f64,
}

impl DeltaConstant {
    /// `min(inj/2, π/(2√ε))`: radius below which balls are convex.
    pub fn convexity_radius(&self) -> f64 {
        (self.inj_used / 2.0).min(PI / (2.0 * self.epsilon_used.sqrt()))
    }

    /// Largest diameter allowed for a unique center of mass, `π/(2√ε)`.
    pub fn karcher_diameter_limit(&self) -> f64 {
        PI / (2.0 * self.epsilon_used.sqrt())
    }

    /// `δ ≤ r` and `2δ ≤ π/(2√ε)`.
    pub fn is_convexity_compatible(&self) -> bool {
        self.delta <= self.convexity_radius() && 2.0 * self.delta <= self.karcher_diameter_limit()
    }
}

/// Draws a random 2-plane as coefficient vectors in an orthonormal tangent basis.
fn plane_from_coeffs(basis: &[TangentPhi], a: &DVector<f64>, b: &DVector<f64>) -> (TangentPhi, TangentPhi) {
    let base = basis[0].base().clone();
    let d = base.dim();
    let mut pa = Mat::zeros(d, d);
    let mut pb = Mat::zeros(d, d);
    for (k, e) in basis.iter().enumerate() {
        pa += e.matrix() * a[k];
        pb += e.matrix() * b[k];
    }
    (
        TangentPhi::new_unchecked(base.clone(), pa),
        TangentPhi::new_unchecked(base, pb),
    )
}

/// Curvature of the plane spanned by two coefficient vectors, evaluated on an
/// orthonormalized pair so that nearly parallel inputs stay well conditioned.
fn curvature_of(basis: &[TangentPhi], a: &DVector<f64>, b: &DVector<f64>) -> Option<f64> {
    let na = a.norm();
    if na < 1e-12 {
        return None;
    }
    let u = a / na;
    let w = b - &u * u.dot(b);
    let nw = w.norm();
    if nw < 1e-6 * b.norm().max(1e-300) {
        return None;
    }
    let (phi, psi) = plane_from_coeffs(basis, &u, &(w / nw));
    sectional_curvature(phi.base(), &phi, &psi).ok()
}

/// Coordinate ascent on the plane coefficients, halving the step whenever
/// no coordinate move improves the curvature.
fn refine_plane(basis: &[TangentPhi], mut a: DVector<f64>, mut b: DVector<f64>) -> f64 {
    let mut best = curvature_of(basis, &a, &b).unwrap_or(0.0);
    let mut step = 0.25;
    let m = a.len();
    while step > 1e-9 {
        let mut improvement = 0.0;
        for coord in 0..2 * m {
            for sign in [1.0, -1.0] {
                let (mut ta, mut tb) = (a.clone(), b.clone());
                if coord < m {
                    ta[coord] += sign * step;
                } else {
                    tb[coord - m] += sign * step;
                }
                if let Some(k) = curvature_of(basis, &ta, &tb) {
                    if k > best {
                        improvement += k - best;
                        best = k;
                        a = ta;
                        b = tb;
                        break;
                    }
                }
            }
        }
        if improvement < 1e-10 {
            step *= 0.5;
        }
    }
    best
}

/// Upper bound ε on sectional curvature, from `num_samples` random planes at
/// `canonical_j(n)` (optionally refined by coordinate ascent from the ten best
/// planes), inflated by [`SAFETY_FACTOR`].
pub fn estimate_epsilon(n: usize, num_samples: usize, seed: u64, refine: bool) -> Result<CurvatureBound> {
    if n < 2 {
        return Err(Error::DimensionTooSmall { n });
    }
    if num_samples < 100 {
        return Err(Error::InvalidInput(format!(
            "need at least 100 curvature samples, got {num_samples}"
        )));
    }
    let j = canonical_j(n)?;
    let basis = tangent_basis(&j);
    let m = basis.len();
    let mut rng = seeded_rng(seed);
    let planes: Vec<(DVector<f64>, DVector<f64>)> = (0..num_samples)
        .map(|_| (gaussian_vector(m, &mut rng), gaussian_vector(m, &mut rng)))
        .collect();
    let values: Vec<f64> = planes
        .par_iter()
        .map(|(a, b)| curvature_of(&basis, a, b).unwrap_or(f64::NEG_INFINITY))
        .collect();
    let mut max_sampled = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut method = BoundMethod::Sampled;
    if refine {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&x, &y| values[y].total_cmp(&values[x]).then(x.cmp(&y)));
        let refined: Vec<f64> = order
            .iter()
            .take(10)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&&i| refine_plane(&basis, planes[i].0.clone(), planes[i].1.clone()))
            .collect();
        max_sampled = refined.into_iter().fold(max_sampled, f64::max);
        method = BoundMethod::Refined;
    }
    if !(max_sampled > 0.0) || !max_sampled.is_finite() {
        return Err(Error::InvalidInput(
            "curvature sampling produced no positive value".into(),
        ));
    }
    Ok(CurvatureBound {
        n,
        epsilon: SAFETY_FACTOR * max_sampled,
        method,
        samples: num_samples,
        max_sampled,
    })
}

/// Conservative injectivity radius from geodesic-minimality marches.
///
/// Along each of `num_directions` random unit geodesics from
/// `canonical_j(n)`, `t` advances in steps of `resolution` until the
/// logarithm fails or the distance falls below `t − 2·resolution`. The
/// smallest such `t` over all directions, minus one step, is returned.
pub fn estimate_injectivity(
    n: usize,
    num_directions: usize,
    resolution: f64,
    seed: u64,
) -> Result<InjectivityEstimate> {
    if n < 2 {
        return Err(Error::DimensionTooSmall { n });
    }
    if !(resolution > 0.0 && resolution <= 0.01) {
        return Err(Error::InvalidInput(format!(
            "resolution must lie in (0, 0.01], got {resolution}"
        )));
    }
    if num_directions == 0 {
        return Err(Error::InvalidInput("need at least one direction".into()));
    }
    let j = canonical_j(n)?;
    let basis = tangent_basis(&j);
    let mut rng = seeded_rng(seed);
    let directions: Vec<DVector<f64>> = (0..num_directions)
        .map(|_| gaussian_vector(basis.len(), &mut rng))
        .collect();
    // A unit geodesic reaches the cut locus no later than π·√(2n).
    let t_cap = PI * ((2 * n) as f64).sqrt() + 10.0 * resolution;
    let marches: Vec<(f64, f64)> = directions
        .par_iter()
        .map(|coeffs| {
            let (phi, _) = plane_from_coeffs(&basis, coeffs, coeffs);
            let phi = phi.scaled(1.0 / phi.norm());
            let mut gap: f64 = 0.0;
            let mut k = 1usize;
            loop {
                let t = k as f64 * resolution;
                if t > t_cap {
                    return (t_cap, gap);
                }
                let target = exp_map(&j, &phi, t).expect("same base");
                match distance(&j, &target) {
                    Ok(d) if d >= t - 2.0 * resolution => gap = gap.max((d - t).abs()),
                    _ => return (t, gap),
                }
                k += 1;
            }
        })
        .collect();
    let first_failure: Vec<f64> = marches.iter().map(|m| m.0).collect();
    let max_minimality_gap = marches.iter().map(|m| m.1).fold(0.0, f64::max);
    let t_min = first_failure.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(InjectivityEstimate {
        n,
        inj_lower: t_min - resolution,
        directions_sampled: num_directions,
        resolution,
        first_failure,
        max_minimality_gap,
    })
}

/// `δ = min(inj/2, π/(4√ε))`.
pub fn delta_2n(n: usize, eps: &CurvatureBound, inj: &InjectivityEstimate) -> Result<DeltaConstant> {
    if n < 2 {
        return Err(Error::DimensionTooSmall { n });
    }
    for found in [eps.n, inj.n] {
        if found != n {
            return Err(Error::DimensionMismatch { expected: n, found });
        }
    }
    let delta = (inj.inj_lower / 2.0).min(PI / (4.0 * eps.epsilon.sqrt()));
    Ok(DeltaConstant {
        n,
        delta,
        epsilon_used: eps.epsilon,
        inj_used: inj.inj_lower,
    })
}

/// Parameters that fully determine an estimated [`DeltaConstant`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaParams {
    pub n: usize,
    pub seed: u64,
    pub num_samples: usize,
    pub num_directions: usize,
    pub resolution: f64,
    pub refine: bool,
    pub epsilon_override: Option<f64>,
}

impl DeltaParams {
    pub fn new(n: usize, seed: u64) -> Self {
        DeltaParams {
            n,
            seed,
            num_samples: 2000,
            num_directions: 32,
            resolution: 0.01,
            refine: true,
            epsilon_override: None,
        }
    }

    /// Cache key `n=<n>;seed=<s>;ns=<num_samples>;res=<resolution>`, with the
    /// remaining parameters appended when they differ from the defaults.
    pub fn cache_key(&self) -> String {
        let mut key = format!(
            "n={};seed={};ns={};res={}",
            self.n, self.seed, self.num_samples, self.resolution
        );
        let defaults = DeltaParams::new(self.n, self.seed);
        if self.num_directions != defaults.num_directions {
            key.push_str(&format!(";dirs={}", self.num_directions));
        }
        if self.refine != defaults.refine {
            key.push_str(&format!(";refine={}", self.refine));
        }
        if let Some(eps) = self.epsilon_override {
            key.push_str(&format!(";eps={eps}"));
        }
        key
    }

    pub fn estimate(&self) -> Result<DeltaConstant> {
        let eps = match self.epsilon_override {
            Some(e) => CurvatureBound::user_override(self.n, e)?,
            None => estimate_epsilon(self.n, self.num_samples, self.seed, self.refine)?,
        };
        let inj = estimate_injectivity(self.n, self.num_directions, self.resolution, self.seed)?;
        delta_2n(self.n, &eps, &inj)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheEntry {
    pub epsilon: f64,
    pub inj_lower: f64,
    pub delta: f64,
}

/// JSON file mapping [`DeltaParams::cache_key`] to [`CacheEntry`].
#[derive(Debug, Clone)]
pub struct DeltaCache {
    path: PathBuf,
}

impl DeltaCache {
    pub const ENV_VAR: &'static str = "KAHLER_PROBE_CACHE";

    pub fn new(path: impl Into<PathBuf>) -> Self {
        DeltaCache { path: path.into() }
    }

    /// `$KAHLER_PROBE_CACHE`, else a file in the system temp directory.
    pub fn from_env() -> Self {
        match std::env::var_os(Self::ENV_VAR) {
            Some(p) => DeltaCache::new(p),
            None => DeltaCache::new(std::env::temp_dir().join("kahler_probe_delta_cache.json")),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn load(&self) -> Result<BTreeMap<String, CacheEntry>> {
        match std::fs::read_to_string(&self.path) {
            Ok(text) if text.trim().is_empty() => Ok(BTreeMap::new()),
            Ok(text) => Ok(serde_json::from_str(&text)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(BTreeMap::new()),
            Err(e) => Err(e.into()),
        }
    }

    fn store(&self, key: String, entry: CacheEntry) -> Result<()> {
        // An unreadable cache is overwritten rather than treated as fatal.
        let mut map = self.load().unwrap_or_default();
        map.insert(key, entry);
        if let Some(parent) = self.path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let tmp = self.path.with_extension(format!("tmp{}", std::process::id()));
        std::fs::write(&tmp, serde_json::to_string_pretty(&map)?)?;
        std::fs::rename(&tmp, &self.path)?;
        Ok(())
    }

    /// Cached constant for `params`, computing and storing it on a miss or
    /// when `force` is set.
    pub fn get_or_compute(&self, params: &DeltaParams, force: bool) -> Result<DeltaConstant> {
        let key = params.cache_key();
        if !force {
            if let Some(hit) = self.load().ok().and_then(|m| m.get(&key).cloned()) {
                return Ok(DeltaConstant {
                    n: params.n,
                    delta: hit.delta,
                    epsilon_used: hit.epsilon,
                    inj_used: hit.inj_lower,
                });
            }
        }
        let delta = params.estimate()?;
        self.store(
            key,
            CacheEntry {
                epsilon: delta.epsilon_used,
                inj_lower: delta.inj_used,
                delta: delta.delta,
            },
        )?;
        Ok(delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(n: usize, eps: f64, inj: f64) -> DeltaConstant {
        delta_2n(
            n,
            &CurvatureBound::user_override(n, eps).unwrap(),
            &InjectivityEstimate::user_supplied(n, inj).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn curvature_branch_of_formula() {
        let d = synthetic(2, 1.0, 10.0);
        assert!((d.delta - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn injectivity_branch_of_formula() {
        let d = synthetic(2, PI * PI / 4.0, 0.5);
        assert!((d.delta - 0.25).abs() < 1e-15);
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let eps = CurvatureBound::user_override(3, 1.0).unwrap();
        let inj = InjectivityEstimate::user_supplied(2, 1.0).unwrap();
        assert_eq!(
            delta_2n(2, &eps, &inj),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        );
    }

    #[test]
    fn plane_case_is_too_small() {
        assert_eq!(
            estimate_epsilon(1, 100, 0, false),
            Err(Error::DimensionTooSmall { n: 1 })
        );
        assert_eq!(
            estimate_injectivity(1, 4, 0.01, 0),
            Err(Error::DimensionTooSmall { n: 1 })
        );
    }

    #[test]
    fn epsilon_dominates_every_sample() {
        let bound = estimate_epsilon(3, 300, 5, false).unwrap();
        assert!(bound.epsilon >= bound.max_sampled);
        assert!((bound.epsilon - SAFETY_FACTOR * bound.max_sampled).abs() < 1e-15);
    }

    #[test]
    fn delta_is_antitone_in_epsilon_and_monotone_in_inj() {
        let base = synthetic(2, 0.5, 3.0).delta;
        assert!(synthetic(2, 0.8, 3.0).delta <= base);
        assert!(synthetic(2, 0.5, 4.0).delta >= base);
        assert!(synthetic(2, 0.5, 1.0).delta <= base);
    }

    #[test]
    fn cache_key_format() {
        let p = DeltaParams::new(2, 7);
        assert_eq!(p.cache_key(), "n=2;seed=7;ns=2000;res=0.01");
    }

    #[test]
    fn cache_hit_reproduces_value() {
        let dir = tempfile::tempdir().unwrap();
        let cache = DeltaCache::new(dir.path().join("c.json"));
        let mut p = DeltaParams::new(2, 3);
        p.num_samples = 200;
        p.num_directions = 4;
        let first = cache.get_or_compute(&p, false).unwrap();
        let second = cache.get_or_compute(&p, false).unwrap();
        assert_eq!(first, second);
        let stored = cache.load().unwrap();
        assert_eq!(stored[&p.cache_key()].delta, first.delta);
    }
}
