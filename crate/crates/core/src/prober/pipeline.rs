use serde::{Deserialize, Serialize};

use super::field::{build_global_j, Certificates};
use super::orbit::{average_until_fixed, near_preservation_test, orbit, orbit_distance, OrbitReport};
use crate::acs::{canonical_j, conjugate, validate_j, OrthoComplexStructure, TOL_ALG};
use crate::delta::DeltaConstant;
use crate::error::{Error, Result};
use crate::holonomy::{
    holonomy_samples, loop_family, orthonormal_frame, parallel_transport, HolonomySample, LoopKind, ManifoldChart,
    FD_STEP,
};
use crate::linalg::{polar_orthogonal, Mat};

/// Residuals at or below this level are treated as exact, so the
/// refinement-decay requirement does not apply to them.
pub const NOISE_FLOOR: f64 = 1e-8;
/// Required shrink factor of each certificate when the grid spacing halves.
pub const REFINEMENT_DECAY: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub loops: usize,
    pub loop_kind: LoopKind,
    pub loop_scale: f64,
    pub ode_steps: usize,
    pub word_length: usize,
    pub seed: u64,
    pub grid: usize,
    /// RK4 steps per grid spacing when extending the structure; the
    /// refined grid uses half as many so the step length is unchanged.
    pub grid_steps: usize,
    pub mean_tol: f64,
    pub max_rounds: usize,
    pub fixed_tol: f64,
    pub path_tol: f64,
    pub certificate_tol: f64,
    /// Recompute the certificates at `2·grid − 1` and require decay.
    pub refine: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            loops: 6,
            loop_kind: LoopKind::CoordinateRectangles,
            loop_scale: 0.4,
            ode_steps: 1000,
            word_length: 3,
            seed: 0,
            grid: 17,
            grid_steps: 4,
            mean_tol: 1e-9,
            max_rounds: 200,
            fixed_tol: 1e-5,
            path_tol: 1e-4,
            certificate_tol: 1e-3,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum JSpec {
    /// The chart's distinguished structure if it has one, else the
    /// canonical structure, in the orthonormal frame at the base point.
    Auto,
    Given(OrthoComplexStructure),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictKind {
    KahlerWitness,
    HolonomyObstruction,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Holonomy,
    Orbit,
    Averaging,
    Fixedness,
    GlobalField,
    PathIndependence,
    Certificates,
    Refinement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSummary {
    pub generators: usize,
    pub size: usize,
    pub max_distance: f64,
    pub argmax_loop: usize,
    pub near_preserved: bool,
}

/// A sampled loop whose holonomy moves the base structure further than δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstructionWitness {
    pub loop_index: usize,
    pub distance: f64,
    pub delta: f64,
    pub sample: HolonomySample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Refinement {
    pub grid: usize,
    pub certificates: Certificates,
    pub decay_ok: bool,
}

/// Everything the Kähler branch established before it stopped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KahlerEvidence {
    pub j_prime: Option<OrthoComplexStructure>,
    pub averaging_rounds: usize,
    pub mean_iterations: usize,
    pub fixedness_trace: Vec<f64>,
    pub fixedness: Option<f64>,
    pub path_independence: Option<f64>,
    pub path_comparisons: usize,
    pub grid: Option<usize>,
    pub certificates: Option<Certificates>,
    pub refinement: Option<Refinement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostic {
    pub code: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DichotomyVerdict {
    pub kind: VerdictKind,
    pub manifold: String,
    pub base_point: Vec<f64>,
    pub base_j: OrthoComplexStructure,
    pub delta_used: DeltaConstant,
    pub config: ProbeConfig,
    pub orbit: Option<OrbitSummary>,
    pub obstruction: Option<ObstructionWitness>,
    pub evidence: KahlerEvidence,
    pub failed_stage: Option<Stage>,
    pub diagnostic: Option<Diagnostic>,
    pub caveats: Vec<String>,
}

/// The orthonormal-frame expression at `p` of the chart's distinguished
/// structure, or the canonical structure when the chart has none.
pub fn auto_j(chart: &ManifoldChart, p: &[f64]) -> Result<OrthoComplexStructure> {
    match chart.complex_structure() {
        Some(jc) => {
            let f = orthonormal_frame(chart, p)?;
            let f_inv = f
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::MetricNotInvertible { point: p.to_vec() })?;
            OrthoComplexStructure::nearest(&(f_inv * jc * f))
        }
        None => canonical_j(chart.dim() / 2),
    }
}

fn decays(coarse: f64, fine: f64) -> bool {
    coarse <= NOISE_FLOOR || fine * REFINEMENT_DECAY <= coarse
}

/// Runs the full dichotomy pipeline at `p`.
///
/// Invalid inputs (dimension mismatches, `p` outside the domain) are
/// errors; any failure inside a stage becomes an `Inconclusive` verdict
/// naming that stage.
pub fn probe(
    chart: &ManifoldChart,
    p: &[f64],
    j: &JSpec,
    delta: &DeltaConstant,
    config: &ProbeConfig,
) -> Result<DichotomyVerdict> {
    let d = chart.dim();
    if p.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: p.len(),
        });
    }
    if 2 * delta.n != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: 2 * delta.n,
        });
    }
    if !chart.contains(p, 2.0 * FD_STEP) {
        return Err(Error::OutsideDomain { point: p.to_vec() });
    }
    let base_j = match j {
        JSpec::Auto => auto_j(chart, p)?,
        JSpec::Given(j) if j.dim() != d => {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: j.dim(),
            })
        }
        JSpec::Given(j) => j.clone(),
    };
    let mut verdict = DichotomyVerdict {
        kind: VerdictKind::Inconclusive,
        manifold: chart.name().to_string(),
        base_point: p.to_vec(),
        base_j: base_j.clone(),
        delta_used: delta.clone(),
        config: config.clone(),
        orbit: None,
        obstruction: None,
        evidence: KahlerEvidence::default(),
        failed_stage: None,
        diagnostic: None,
        caveats: vec![
            "orbit distances come from finitely many sampled loops and bound the true orbit diameter from below".into(),
            "Kahler certificates are finite-difference residuals, not proofs".into(),
        ],
    };
    if let Err((stage, diagnostic)) = run_stages(chart, p, &base_j, delta, config, &mut verdict) {
        verdict.kind = VerdictKind::Inconclusive;
        verdict.failed_stage = Some(stage);
        verdict.diagnostic = Some(diagnostic);
    }
    Ok(verdict)
}

type StageResult = std::result::Result<(), (Stage, Diagnostic)>;

fn failed(stage: Stage, e: Error) -> (Stage, Diagnostic) {
    (
        stage,
        Diagnostic {
            code: e.code().to_string(),
            detail: e.to_string(),
        },
    )
}

/// A stage ran but its residual missed the configured tolerance.
fn exceeded(stage: Stage, detail: String) -> (Stage, Diagnostic) {
    (
        stage,
        Diagnostic {
            code: "tolerance_exceeded".into(),
            detail,
        },
    )
}

fn run_stages(
    chart: &ManifoldChart,
    p: &[f64],
    base_j: &OrthoComplexStructure,
    delta: &DeltaConstant,
    cfg: &ProbeConfig,
    verdict: &mut DichotomyVerdict,
) -> StageResult {
    let at = |stage: Stage| move |e: Error| failed(stage, e);
    let loops =
        loop_family(chart, p, cfg.loop_kind, cfg.loops, cfg.loop_scale, cfg.seed).map_err(at(Stage::Holonomy))?;
    let samples = holonomy_samples(chart, p, &loops, cfg.ode_steps, cfg.word_length).map_err(at(Stage::Holonomy))?;
    let report = orbit(base_j, &samples).map_err(at(Stage::Orbit))?;
    let near = near_preservation_test(&report, delta);
    verdict.orbit = Some(OrbitSummary {
        generators: loops.len(),
        size: report.orbit.len(),
        max_distance: report.max_distance,
        argmax_loop: report.argmax_loop,
        near_preserved: near,
    });
    if !near {
        verdict.kind = VerdictKind::HolonomyObstruction;
        verdict.obstruction = Some(ObstructionWitness {
            loop_index: report.argmax_loop,
            distance: report.max_distance,
            delta: delta.delta,
            sample: report.samples[report.argmax_loop].clone(),
        });
        return Ok(());
    }
    kahler_branch(chart, p, &report, delta, cfg, &mut verdict.evidence)?;
    verdict.kind = VerdictKind::KahlerWitness;
    Ok(())
}

fn kahler_branch(
    chart: &ManifoldChart,
    p: &[f64],
    report: &OrbitReport,
    delta: &DeltaConstant,
    cfg: &ProbeConfig,
    ev: &mut KahlerEvidence,
) -> StageResult {
    let at = |stage: Stage| move |e: Error| failed(stage, e);
    let target = (cfg.fixed_tol * 1e-4).max(1e-12);
    let avg = average_until_fixed(report, delta, cfg.mean_tol, target, cfg.max_rounds).map_err(at(Stage::Averaging))?;
    let j_prime = avg.mean.mean.clone();
    let fixedness = *avg.fixedness_trace.last().unwrap_or(&f64::INFINITY);
    ev.j_prime = Some(j_prime.clone());
    ev.averaging_rounds = avg.rounds;
    ev.mean_iterations = avg.mean.iterations;
    ev.fixedness_trace = avg.fixedness_trace;
    ev.fixedness = Some(fixedness);
    if !(fixedness < cfg.fixed_tol) {
        return Err(exceeded(
            Stage::Fixedness,
            format!(
                "fixedness residual {fixedness:.3e} exceeds tolerance {:.1e}",
                cfg.fixed_tol
            ),
        ));
    }

    let field = build_global_j(chart, p, &j_prime, cfg.grid, cfg.grid_steps).map_err(at(Stage::GlobalField))?;
    ev.grid = Some(cfg.grid);
    ev.path_independence = Some(field.path_independence_residual());
    ev.path_comparisons = field.path_comparisons();
    if !(field.path_independence_residual() < cfg.path_tol) {
        return Err(exceeded(
            Stage::PathIndependence,
            format!(
                "path-independence residual {:.3e} exceeds tolerance {:.1e}",
                field.path_independence_residual(),
                cfg.path_tol
            ),
        ));
    }
    let certs = Certificates::compute(&field).map_err(at(Stage::Certificates))?;
    ev.certificates = Some(certs);
    drop(field);
    if !(certs.max() < cfg.certificate_tol) {
        return Err(exceeded(
            Stage::Certificates,
            format!(
                "certificates (nabla_j {:.3e}, nijenhuis {:.3e}, d_omega {:.3e}) exceed tolerance {:.1e}",
                certs.nabla_j, certs.nijenhuis, certs.d_omega, cfg.certificate_tol
            ),
        ));
    }

    if cfg.refine {
        let fine_grid = 2 * cfg.grid - 1;
        let fine_field =
            build_global_j(chart, p, &j_prime, fine_grid, cfg.grid_steps.div_ceil(2)).map_err(at(Stage::Refinement))?;
        let fine = Certificates::compute(&fine_field).map_err(at(Stage::Refinement))?;
        let decay_ok = decays(certs.nabla_j, fine.nabla_j)
            && decays(certs.nijenhuis, fine.nijenhuis)
            && decays(certs.d_omega, fine.d_omega);
        ev.refinement = Some(Refinement {
            grid: fine_grid,
            certificates: fine,
            decay_ok,
        });
        if !decay_ok {
            return Err(exceeded(
                Stage::Refinement,
                format!(
                    "residuals did not shrink {REFINEMENT_DECAY}x from grid {} to grid {fine_grid}",
                    cfg.grid
                ),
            ));
        }
    }
    Ok(())
}

/// Recomputes the witness distance from scratch: transports along the
/// recorded loop with the recorded step count and conjugates `base_j`.
pub fn replay_witness(
    chart: &ManifoldChart,
    witness: &ObstructionWitness,
    base_j: &OrthoComplexStructure,
) -> Result<f64> {
    let t = parallel_transport(chart, &witness.sample.loop_path, witness.sample.ode_steps)?;
    let h: Mat = polar_orthogonal(&t.matrix);
    let image = conjugate(&h, base_j)?;
    orbit_distance(base_j, &image)
}

/// Parses a user-supplied structure, validating it at the algebraic tolerance.
pub fn given_j(mat: &Mat) -> Result<JSpec> {
    Ok(JSpec::Given(validate_j(mat, TOL_ALG)?))
}
