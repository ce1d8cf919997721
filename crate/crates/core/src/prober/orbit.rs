use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acs::{conjugate, distance, eigenangle_distance, OrthoComplexStructure};
use crate::delta::DeltaConstant;
use crate::error::{Error, Result};
use crate::holonomy::HolonomySample;
use crate::karcher::{check_convexity_around, karcher_mean, MeanResult, WeightedSampleSet, DEFAULT_MAX_ITER};

/// The orbit `{h⁻¹ J h}` of a structure under sampled holonomy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitReport {
    pub base_j: OrthoComplexStructure,
    pub samples: Vec<HolonomySample>,
    pub orbit: Vec<OrthoComplexStructure>,
    pub distances: Vec<f64>,
    pub max_distance: f64,
    pub argmax_loop: usize,
}

/// Geodesic distance, falling back to the eigenangle formula on the cut
/// locus where the logarithm is not unique.
pub fn orbit_distance(a: &OrthoComplexStructure, b: &OrthoComplexStructure) -> Result<f64> {
    match distance(a, b) {
        Err(Error::CutLocus { .. }) => eigenangle_distance(a, b),
        other => other,
    }
}

fn check_samples(j: &OrthoComplexStructure, samples: &[HolonomySample]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no holonomy samples".into()));
    }
    for (index, s) in samples.iter().enumerate() {
        if s.matrix.nrows() != j.dim() {
            return Err(Error::DimensionMismatch {
                expected: j.dim(),
                found: s.matrix.nrows(),
            });
        }
        let det = s.matrix.determinant();
        if det < 0.0 {
            return Err(Error::DeterminantAnomaly { index, det });
        }
    }
    Ok(())
}

pub fn orbit(j_p: &OrthoComplexStructure, samples: &[HolonomySample]) -> Result<OrbitReport> {
    check_samples(j_p, samples)?;
    let pairs = samples
        .par_iter()
        .map(|s| {
            let image = conjugate(&s.matrix, j_p)?;
            let d = orbit_distance(j_p, &image)?;
            Ok((image, d))
        })
        .collect::<Result<Vec<_>>>()?;
    let (orbit, distances): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let mut argmax_loop = 0;
    for (i, d) in distances.iter().enumerate() {
        if *d > distances[argmax_loop] {
            argmax_loop = i;
        }
    }
    Ok(OrbitReport {
        base_j: j_p.clone(),
        samples: samples.to_vec(),
        max_distance: distances[argmax_loop],
        orbit,
        distances,
        argmax_loop,
    })
}

/// The orbit lies in the closed ball of radius δ about its base.
pub fn near_preservation_test(report: &OrbitReport, delta: &DeltaConstant) -> bool {
    report.base_j.n() == delta.n && report.max_distance <= delta.delta
}

/// Uniform-weight center of mass of the orbit.
pub fn average_to_fixed(report: &OrbitReport, delta: &DeltaConstant, tol: f64) -> Result<MeanResult> {
    let set = WeightedSampleSet::uniform(report.orbit.clone())?;
    let convexity = check_convexity_around(&set, &report.base_j, delta);
    if !convexity.passed() {
        return Err(Error::ConvexityViolation {
            detail: convexity.describe(),
        });
    }
    let result = karcher_mean(&set, tol, DEFAULT_MAX_ITER)?;
    if !result.converged {
        return Err(Error::DidNotConverge {
            iterations: result.iterations,
            grad_norm: result.final_grad_norm,
        });
    }
    Ok(result)
}

/// `max_h d(J, h⁻¹ J h)` over the samples.
pub fn fixedness_check(j: &OrthoComplexStructure, samples: &[HolonomySample]) -> Result<f64> {
    check_samples(j, samples)?;
    samples
        .par_iter()
        .map(|s| orbit_distance(j, &conjugate(&s.matrix, j)?))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingOutcome {
    pub mean: MeanResult,
    pub rounds: usize,
    /// Fixedness residual after each round.
    pub fixedness_trace: Vec<f64>,
}

/// Repeats [`average_to_fixed`] on the orbit of the previous mean until the
/// fixedness residual drops below `target`, stops shrinking by at least
/// 10% per round, or `max_rounds` is reached. A finite sample of the
/// holonomy group leaves the one-shot mean slightly off the fixed set;
/// the iteration contracts that remainder geometrically.
pub fn average_until_fixed(
    report: &OrbitReport,
    delta: &DeltaConstant,
    tol: f64,
    target: f64,
    max_rounds: usize,
) -> Result<AveragingOutcome> {
    let mut mean = average_to_fixed(report, delta, tol)?;
    let mut residual = fixedness_check(&mean.mean, &report.samples)?;
    let mut trace = vec![residual];
    let mut rounds = 1;
    while rounds < max_rounds.max(1) && residual > target {
        let next_report = orbit(&mean.mean, &report.samples)?;
        let next = average_to_fixed(&next_report, delta, tol)?;
        let next_residual = fixedness_check(&next.mean, &report.samples)?;
        rounds += 1;
        if next_residual > 0.9 * residual {
            if next_residual < residual {
                mean = next;
                residual = next_residual;
                trace.push(residual);
            }
            break;
        }
        mean = next;
        residual = next_residual;
        trace.push(residual);
    }
    Ok(AveragingOutcome {
        mean,
        rounds,
        fixedness_trace: trace,
    })
}
