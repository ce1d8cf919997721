use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode of the library. Each variant maps to a stable
/// machine-readable code string (see [`Error::code`]) which the CLI emits.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("J² + I has max-abs entry {residual:.3e}")]
    NotAComplexStructure { residual: f64 },
    #[error("JᵀJ − I has max-abs entry {residual:.3e}")]
    NotOrthogonal { residual: f64 },
    #[error("matrix dimension {dim} is odd")]
    OddDimension { dim: usize },
    #[error("matrix is {rows}×{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("complex dimension n must be at least 1")]
    ZeroDimension,
    #[error("tangent vectors live at different base points")]
    BasePointMismatch,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("target lies on the cut locus (eigenvalue −1 in J2·J1⁻¹, 1 + min cos = {margin:.3e})")]
    CutLocus { margin: f64 },
    #[error("structures lie in different connected components: {detail}")]
    ComponentMismatch { detail: String },
    #[error("QᵀQ − I has max-abs entry {residual:.3e}")]
    NotOrthogonalGroupElement { residual: f64 },
    #[error("tangent plane is degenerate (Gram determinant {gram:.3e})")]
    DegeneratePlane { gram: f64 },
    #[error("projection onto the tangent space vanished for every retry seed")]
    ZeroProjection,
    #[error("operation needs n ≥ 2, got n = {n}")]
    DimensionTooSmall { n: usize },
    #[error("Karcher iteration stopped after {iterations} iterations with gradient norm {grad_norm:.3e}")]
    DidNotConverge { iterations: usize, grad_norm: f64 },
    #[error("sample set violates the convexity hypothesis: {detail}")]
    ConvexityViolation { detail: String },
    #[error("point {point:?} lies outside the chart domain")]
    OutsideDomain { point: Vec<f64> },
    #[error("metric is not positive definite at {point:?}")]
    MetricNotInvertible { point: Vec<f64> },
    #[error("transport orthogonality defect {defect:.3e} exceeds 1e-4; raise the step count")]
    StepTooCoarse { defect: f64 },
    #[error("loop leaves the chart domain")]
    LoopEscapesDomain,
    #[error("unknown manifold `{0}`")]
    UnknownManifold(String),
    #[error("grid resolution {grid_res} is below the minimum of 9")]
    GridTooCoarse { grid_res: usize },
    #[error("ω = gJ fails antisymmetry by {residual:.3e}")]
    FormNotAntisymmetric { residual: f64 },
    #[error("holonomy sample {index} has determinant {det:.6}")]
    DeterminantAnomaly { index: usize, det: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotAComplexStructure { .. } => "not_a_complex_structure",
            Error::NotOrthogonal { .. } => "not_orthogonal",
            Error::OddDimension { .. } => "odd_dimension",
            Error::NotSquare { .. } => "not_square",
            Error::ZeroDimension => "zero_dimension",
            Error::BasePointMismatch => "base_point_mismatch",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::CutLocus { .. } => "cut_locus",
            Error::ComponentMismatch { .. } => "component_mismatch",
            Error::NotOrthogonalGroupElement { .. } => "not_orthogonal_group_element",
            Error::DegeneratePlane { .. } => "degenerate_plane",
            Error::ZeroProjection => "zero_projection",
            Error::DimensionTooSmall { .. } => "dimension_too_small",
            Error::DidNotConverge { .. } => "did_not_converge",
            Error::ConvexityViolation { .. } => "convexity_violation",
            Error::OutsideDomain { .. } => "outside_domain",
            Error::MetricNotInvertible { .. } => "metric_not_invertible",
            Error::StepTooCoarse { .. } => "step_too_coarse",
            Error::LoopEscapesDomain => "loop_escapes_domain",
            Error::UnknownManifold(_) => "unknown_manifold",
            Error::GridTooCoarse { .. } => "grid_too_coarse",
            Error::FormNotAntisymmetric { .. } => "form_not_antisymmetric",
            Error::DeterminantAnomaly { .. } => "determinant_anomaly",
            Error::InvalidInput(_) => "invalid_input",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidInput(e.to_string())
    }
}
