//! The dichotomy pipeline: holonomy orbit of a structure, comparison with
//! δ, averaging to a fixed structure, extension over a chart by parallel
//! transport, and finite-difference Kähler certificates.

mod field;
mod orbit;
mod pipeline;

pub use field::{
    build_global_j, covariant_constancy_check, kahler_form_check, nijenhuis_check, Certificates, GlobalJField, Grid,
    GRID_FRACTION, MIN_CERTIFICATE_GRID, PATH_COMPARISONS,
};
pub use orbit::{
    average_to_fixed, average_until_fixed, fixedness_check, near_preservation_test, orbit, orbit_distance,
    AveragingOutcome, OrbitReport,
};
pub use pipeline::{
    auto_j, given_j, probe, replay_witness, Diagnostic, DichotomyVerdict, JSpec, KahlerEvidence, ObstructionWitness,
    OrbitSummary, ProbeConfig, Refinement, Stage, VerdictKind, NOISE_FLOOR, REFINEMENT_DECAY,
};
