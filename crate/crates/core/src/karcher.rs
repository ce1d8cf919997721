//! Riemannian center of mass of a finite weighted set of structures.
//!
//! The energy `E(y) = ½ Σ wᵢ d(xᵢ, y)²` is minimized by gradient descent
//! `y ← exp_y(−grad E)` with unit step and Armijo halving. All points must
//! share a connected component; the convexity hypothesis of the center of
//! mass theorem is checked by [`check_convexity`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acs::{distance, exp_map, log_map, OrthoComplexStructure, TangentPhi};
use crate::delta::DeltaConstant;
use crate::error::{Error, Result};
use crate::linalg::Mat;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 500;
const MAX_HALVINGS: usize = 40;

/// A discrete probability measure on one component of the space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSampleSet {
    points: Vec<OrthoComplexStructure>,
    weights: Vec<f64>,
}

impl WeightedSampleSet {
    pub fn new(points: Vec<OrthoComplexStructure>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("sample set is empty".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        let dim = points[0].dim();
        let orientation = points[0].orientation();
        for p in &points[1..] {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
            if p.orientation() != orientation {
                return Err(Error::ComponentMismatch {
                    detail: "sample set spans both orientation classes".into(),
                });
            }
        }
        Ok(WeightedSampleSet { points, weights })
    }

    pub fn uniform(points: Vec<OrthoComplexStructure>) -> Result<Self> {
        let k = points.len();
        if k == 0 {
            return Err(Error::InvalidInput("sample set is empty".into()));
        }
        // Spread the rounding remainder so the weights sum to 1 within 1e-12.
        let mut weights = vec![1.0 / k as f64; k];
        let drift = 1.0 - weights.iter().sum::<f64>();
        weights[0] += drift;
        WeightedSampleSet::new(points, weights)
    }

    pub fn points(&self) -> &[OrthoComplexStructure] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    /// Index of the heaviest point, first one on ties.
    pub fn heaviest(&self) -> usize {
        let mut best = 0;
        for (i, w) in self.weights.iter().enumerate() {
            if *w > self.weights[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanResult {
    pub mean: OrthoComplexStructure,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub energy: f64,
    pub converged: bool,
    /// Energy after every accepted step, starting with the initial point.
    pub energy_trace: Vec<f64>,
}

fn check_dim(y: &OrthoComplexStructure, s: &WeightedSampleSet) -> Result<()> {
    if y.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            found: y.dim(),
        });
    }
    Ok(())
}

/// `½ Σ wᵢ d(xᵢ, y)²`.
pub fn karcher_energy(y: &OrthoComplexStructure, s: &WeightedSampleSet) -> Result<f64> {
    check_dim(y, s)?;
    let terms: Vec<Result<f64>> = s
        .points
        .par_iter()
        .zip(s.weights.par_iter())
        .map(|(p, w)| distance(p, y).map(|d| w * d * d))
        .collect();
    let mut total = 0.0;
    for t in terms {
        total += t?;
    }
    Ok(0.5 * total)
}

/// Riemannian gradient `−Σ wᵢ log_y(xᵢ)`.
pub fn karcher_gradient(y: &OrthoComplexStructure, s: &WeightedSampleSet) -> Result<TangentPhi> {
    check_dim(y, s)?;
    let logs: Vec<Result<Mat>> = s
        .points
        .par_iter()
        .zip(s.weights.par_iter())
        .map(|(p, w)| log_map(y, p).map(|v| v.matrix() * *w))
        .collect();
    let d = y.dim();
    let mut acc = Mat::zeros(d, d);
    for l in logs {
        acc += l?;
    }
    Ok(TangentPhi::new_unchecked(y.clone(), -acc))
}

/// Center of mass starting from the heaviest sample point.
pub fn karcher_mean(s: &WeightedSampleSet, tol: f64, max_iter: usize) -> Result<MeanResult> {
    let start = s.points[s.heaviest()].clone();
    karcher_mean_from(s, start, tol, max_iter)
}

/// Center of mass starting from an arbitrary point of the same component.
///
/// Stops when the gradient norm drops below `tol`. Reaching `max_iter`
/// returns the best iterate with `converged = false`.
pub fn karcher_mean_from(
    s: &WeightedSampleSet,
    start: OrthoComplexStructure,
    tol: f64,
    max_iter: usize,
) -> Result<MeanResult> {
    if !(tol >= 1e-12) {
        return Err(Error::InvalidInput(format!(
            "tolerance must be at least 1e-12, got {tol}"
        )));
    }
    let mut y = start;
    let mut energy = karcher_energy(&y, s)?;
    let mut trace = vec![energy];
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;
    while iterations < max_iter.max(1) {
        let grad = karcher_gradient(&y, s)?;
        iterations += 1;
        grad_norm = grad.norm();
        if grad_norm < tol {
            return Ok(MeanResult {
                mean: y,
                iterations,
                final_grad_norm: grad_norm,
                energy,
                converged: true,
                energy_trace: trace,
            });
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate = OrthoComplexStructure::nearest(exp_map(&y, &grad, -step)?.matrix())?;
            if let Ok(e) = karcher_energy(&candidate, s) {
                // Near the minimum the decrease drops below one ulp of E.
                if e <= energy * (1.0 + 8.0 * f64::EPSILON) {
                    accepted = Some((candidate, e));
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((next, e)) => {
                y = next;
                energy = e;
                trace.push(e);
            }
            // No descent step exists at floating-point resolution.
            None => break,
        }
    }
    Ok(MeanResult {
        mean: y,
        iterations,
        final_grad_norm: grad_norm,
        energy,
        converged: false,
        energy_trace: trace,
    })
}

/// [`karcher_mean`] after verifying the convexity hypothesis.
pub fn karcher_mean_checked(
    s: &WeightedSampleSet,
    delta: &DeltaConstant,
    tol: f64,
    max_iter: usize,
) -> Result<MeanResult> {
    let report = check_convexity(s, delta);
    if !report.passed() {
        return Err(Error::ConvexityViolation {
            detail: report.describe(),
        });
    }
    karcher_mean(s, tol, max_iter)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    /// Every point lies within `ball_limit` of the center.
    pub ball_ok: bool,
    /// Diameter is at most `π/(2√ε)`.
    pub diameter_ok: bool,
    /// Sample index of the center; `None` for an external center.
    pub center_index: Option<usize>,
    pub center_radius: f64,
    pub ball_limit: f64,
    /// Exact for [`check_convexity`], the bound `2·center_radius` for
    /// [`check_convexity_around`].
    pub diameter: f64,
    pub diameter_limit: f64,
    /// Pair of indices realizing the diameter, when computed exactly.
    pub diameter_pair: Option<(usize, usize)>,
}

impl ConvexityReport {
    pub fn passed(&self) -> bool {
        self.ball_ok && self.diameter_ok
    }

    pub fn describe(&self) -> String {
        format!(
            "ball radius {:.6} around {} (limit {:.6}), diameter {:.6}{} (limit {:.6})",
            self.center_radius,
            match self.center_index {
                Some(i) => format!("sample {i}"),
                None => "external center".to_string(),
            },
            self.ball_limit,
            self.diameter,
            match self.diameter_pair {
                Some((i, j)) => format!(" between samples {i} and {j}"),
                None => " (upper bound)".to_string(),
            },
            self.diameter_limit
        )
    }
}

/// Checks containment in a `2δ` ball around some sample point and the
/// diameter bound `π/(2√ε)`. Pairs whose distance is undefined (cut locus
/// or other component) count as infinitely far.
pub fn check_convexity(s: &WeightedSampleSet, delta: &DeltaConstant) -> ConvexityReport {
    let k = s.len();
    let rows: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|i| {
            (0..k)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        distance(&s.points[i], &s.points[j]).unwrap_or(f64::INFINITY)
                    }
                })
                .collect()
        })
        .collect();
    let mut center_index = 0;
    let mut center_radius = f64::INFINITY;
    let mut diameter = 0.0;
    let mut diameter_pair = (0, 0);
    for (i, row) in rows.iter().enumerate() {
        let r = row.iter().cloned().fold(0.0, f64::max);
        if r < center_radius {
            center_radius = r;
            center_index = i;
        }
        for (j, d) in row.iter().enumerate() {
            if *d > diameter {
                diameter = *d;
                diameter_pair = (i, j);
            }
        }
    }
    let ball_limit = 2.0 * delta.delta;
    let diameter_limit = delta.karcher_diameter_limit();
    ConvexityReport {
        ball_ok: center_radius <= ball_limit,
        diameter_ok: diameter <= diameter_limit,
        center_index: Some(center_index),
        center_radius,
        ball_limit,
        diameter,
        diameter_pair: Some(diameter_pair),
        diameter_limit,
    }
}

/// Linear-time variant of [`check_convexity`] for sets known to cluster
/// around `center`: all points within `δ` of it put every pair within
/// `2δ ≤ π/(2√ε)` of each other.
pub fn check_convexity_around(
    s: &WeightedSampleSet,
    center: &OrthoComplexStructure,
    delta: &DeltaConstant,
) -> ConvexityReport {
    let center_radius = s
        .points
        .par_iter()
        .map(|x| distance(center, x).unwrap_or(f64::INFINITY))
        .reduce(|| 0.0, f64::max);
    let diameter = 2.0 * center_radius;
    let diameter_limit = delta.karcher_diameter_limit();
    ConvexityReport {
        ball_ok: center_radius <= delta.delta,
        diameter_ok: diameter <= diameter_limit,
        center_index: None,
        center_radius,
        ball_limit: delta.delta,
        diameter,
        diameter_limit,
        diameter_pair: None,
    }
}
