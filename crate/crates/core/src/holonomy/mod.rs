//! Chart-defined Riemannian manifolds, Levi-Civita parallel transport by
//! RK4 integration, and holonomy sampling around loop families.

mod catalog;
mod chart;
mod path;
mod transport;

pub use catalog::{catalog, catalog_by_name, CatalogName};
pub use chart::{
    christoffel, fd_christoffel, orthonormal_frame, ChartDiagnostics, Christoffel, ChristoffelFn, ManifoldChart,
    MetricFn, FD_STEP,
};
pub use path::{PathPiece, SmoothPath, CLOSURE_TOL};
pub use transport::{
    close_under_words, coordinate_transport, holonomy_samples, loop_family, parallel_transport, HolonomySample, Letter,
    LoopKind, Transport, MAX_DEFECT, MIN_STEPS,
};
