use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{gram_schmidt_frame, max_abs, seeded_rng, Mat};

pub type MetricFn = Arc<dyn Fn(&[f64]) -> Mat + Send + Sync>;
pub type ChristoffelFn = Arc<dyn Fn(&[f64]) -> Christoffel + Send + Sync>;

/// Finite-difference step for metric derivatives.
pub const FD_STEP: f64 = 1e-5;

/// Christoffel symbols `Γ^k_ij` at one point, stored `k`-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(dim: usize) -> Self {
        Christoffel {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        self.data[(k * self.dim + i) * self.dim + j] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Christoffel) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |a, (x, y)| a.max((x - y).abs()))
    }

    /// Largest `|Γ^k_ij − Γ^k_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for k in 0..d {
            for i in 0..d {
                for j in 0..i {
                    worst = worst.max((self.get(k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        worst
    }

    /// Connection matrix `A^k_j = Γ^k_ij vⁱ` along the velocity `v`.
    pub fn contract(&self, velocity: &[f64]) -> Mat {
        let d = self.dim;
        Mat::from_fn(d, d, |k, j| (0..d).map(|i| self.get(k, i, j) * velocity[i]).sum())
    }
}

/// A single-chart Riemannian manifold: an even-dimensional coordinate box
/// with a smooth metric `x ↦ g_ij(x)`.
#[derive(Clone)]
pub struct ManifoldChart {
    name: String,
    dim: usize,
    metric: MetricFn,
    domain: Vec<(f64, f64)>,
    periodic: bool,
    christoffel: Option<ChristoffelFn>,
    complex_structure: Option<Mat>,
}

impl fmt::Debug for ManifoldChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManifoldChart")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("periodic", &self.periodic)
            .field("analytic_christoffel", &self.christoffel.is_some())
            .finish()
    }
}

impl ManifoldChart {
    pub fn new(
        name: impl Into<String>,
        domain: Vec<(f64, f64)>,
        metric: impl Fn(&[f64]) -> Mat + Send + Sync + 'static,
    ) -> Self {
        ManifoldChart {
            name: name.into(),
            dim: domain.len(),
            metric: Arc::new(metric),
            domain,
            periodic: false,
            christoffel: None,
            complex_structure: None,
        }
    }

    pub fn with_christoffel(mut self, f: impl Fn(&[f64]) -> Christoffel + Send + Sync + 'static) -> Self {
        self.christoffel = Some(Arc::new(f));
        self
    }

    /// Every axis wraps around, so no point is ever outside the domain.
    pub fn periodic(mut self) -> Self {
        self.periodic = true;
        self
    }

    /// A distinguished complex structure in the coordinate frame.
    pub fn with_complex_structure(mut self, j: Mat) -> Self {
        self.complex_structure = Some(j);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn has_analytic_christoffel(&self) -> bool {
        self.christoffel.is_some()
    }

    pub fn complex_structure(&self) -> Option<&Mat> {
        self.complex_structure.as_ref()
    }

    /// True if `x` lies inside the box with at least `margin` to spare.
    pub fn contains(&self, x: &[f64], margin: f64) -> bool {
        if x.len() != self.dim || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        self.periodic
            || x.iter()
                .zip(&self.domain)
                .all(|(v, (lo, hi))| *v > lo + margin && *v < hi - margin)
    }

    fn require(&self, x: &[f64], margin: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if !self.contains(x, margin) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        Ok(())
    }

    pub fn metric(&self, x: &[f64]) -> Result<Mat> {
        self.require(x, 0.0)?;
        Ok((self.metric)(x))
    }

    pub(crate) fn metric_unchecked(&self, x: &[f64]) -> Mat {
        (self.metric)(x)
    }

    /// Checks symmetry and positive-definiteness of the metric at `points`
    /// random domain points, and when analytic Christoffels are present,
    /// their agreement with finite differences at 50 points.
    pub fn verify(&self, points: usize, seed: u64) -> Result<ChartDiagnostics> {
        use rand::RngExt;
        let mut rng = seeded_rng(seed);
        let mut diag = ChartDiagnostics::default();
        let mut samples = Vec::with_capacity(points.max(50));
        for _ in 0..points.max(50) {
            let x: Vec<f64> = self
                .domain
                .iter()
                .map(|(lo, hi)| {
                    let pad = 0.05 * (hi - lo);
                    rng.random_range(lo + pad..hi - pad)
                })
                .collect();
            samples.push(x);
        }
        for x in samples.iter().take(points) {
            let g = self.metric(x)?;
            diag.max_asymmetry = diag.max_asymmetry.max(max_abs(&(&g - g.transpose())));
            if g.clone().cholesky().is_none() {
                return Err(Error::MetricNotInvertible { point: x.clone() });
            }
        }
        if self.christoffel.is_some() {
            for x in samples.iter().take(50) {
                let exact = christoffel(self, x)?;
                let fd = fd_christoffel(self, x)?;
                diag.max_christoffel_gap = diag.max_christoffel_gap.max(exact.max_abs_diff(&fd));
            }
        }
        Ok(diag)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChartDiagnostics {
    pub max_asymmetry: f64,
    pub max_christoffel_gap: f64,
}

/// Christoffel symbols of the Levi-Civita connection at `x`: the analytic
/// ones if the chart provides them, else central differences of the metric.
pub fn christoffel(chart: &ManifoldChart, x: &[f64]) -> Result<Christoffel> {
    match &chart.christoffel {
        Some(f) => {
            chart.require(x, 0.0)?;
            Ok(f(x))
        }
        None => fd_christoffel(chart, x),
    }
}

/// `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)` from central differences.
pub fn fd_christoffel(chart: &ManifoldChart, x: &[f64]) -> Result<Christoffel> {
    chart.require(x, 2.0 * FD_STEP)?;
    let d = chart.dim;
    let g = chart.metric_unchecked(x);
    let g_inv = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::MetricNotInvertible { point: x.to_vec() })?
        .inverse();
    let mut dg = Vec::with_capacity(d);
    let mut probe = x.to_vec();
    for l in 0..d {
        probe[l] = x[l] + FD_STEP;
        let plus = chart.metric_unchecked(&probe);
        probe[l] = x[l] - FD_STEP;
        let minus = chart.metric_unchecked(&probe);
        probe[l] = x[l];
        dg.push((plus - minus) / (2.0 * FD_STEP));
    }
    let mut out = Christoffel::zeros(d);
    for i in 0..d {
        for j in i..d {
            // lowered symbol Γ_{l,ij}
            let lowered: Vec<f64> = (0..d)
                .map(|l| 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]))
                .collect();
            for k in 0..d {
                let v: f64 = (0..d).map(|l| g_inv[(k, l)] * lowered[l]).sum();
                out.set(k, i, j, v);
                out.set(k, j, i, v);
            }
        }
    }
    Ok(out)
}

/// Columns form a `g(x)`-orthonormal basis from Gram–Schmidt on the
/// coordinate vectors in order, so `Fᵀ g F = I`.
pub fn orthonormal_frame(chart: &ManifoldChart, x: &[f64]) -> Result<Mat> {
    let g = chart.metric(x)?;
    gram_schmidt_frame(&g).ok_or_else(|| Error::MetricNotInvertible { point: x.to_vec() })
}
