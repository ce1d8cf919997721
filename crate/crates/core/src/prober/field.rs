use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acs::{exp_map, project_tangent, validate_j, OrthoComplexStructure};
use crate::error::{Error, Result};
use crate::holonomy::{christoffel, orthonormal_frame, ManifoldChart, FD_STEP};
use crate::linalg::{gaussian_matrix, max_abs, seeded_rng, Mat};

/// Fraction of each domain axis covered by the grid, centered.
pub const GRID_FRACTION: f64 = 0.8;
/// Smallest per-axis resolution the finite-difference certificates accept.
pub const MIN_CERTIFICATE_GRID: usize = 9;
/// Two-path comparisons recorded by [`build_global_j`].
pub const PATH_COMPARISONS: usize = 12;
const ANTISYMMETRY_TOL: f64 = 1e-8;

/// A regular `res`-per-axis grid. Flat index `Σ iₖ·resᵏ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub res: usize,
}

impl Grid {
    /// The grid over the central [`GRID_FRACTION`] of the chart's domain.
    pub fn central(chart: &ManifoldChart, res: usize) -> Result<Grid> {
        if res < 2 {
            return Err(Error::GridTooCoarse { grid_res: res });
        }
        let pad = 0.5 * (1.0 - GRID_FRACTION);
        let (lo, hi) = chart
            .domain()
            .iter()
            .map(|(a, b)| (a + pad * (b - a), b - pad * (b - a)))
            .unzip();
        Ok(Grid { lo, hi, res })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.res.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.res == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.res - 1) as f64
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lo[axis] + i as f64 * self.spacing(axis)
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.res.pow(axis as u32)
    }

    pub fn index(&self, flat: usize) -> Vec<usize> {
        let mut rest = flat;
        (0..self.dim())
            .map(|_| {
                let i = rest % self.res;
                rest /= self.res;
                i
            })
            .collect()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.index(flat)
            .iter()
            .enumerate()
            .map(|(k, i)| self.coord(k, *i))
            .collect()
    }

    fn is_interior(&self, flat: usize) -> bool {
        self.index(flat).iter().all(|i| *i > 0 && *i + 1 < self.res)
    }
}

/// A complex structure on the grid points, stored in the coordinate frame.
#[derive(Debug, Clone)]
pub struct GlobalJField {
    chart: ManifoldChart,
    base_point: Vec<f64>,
    grid: Grid,
    coordinate_j: Vec<f64>,
    path_independence_residual: f64,
    path_comparisons: usize,
}

fn to_frame(f: &Mat, jc: &Mat) -> Result<Mat> {
    let f_inv = f
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("singular frame".into()))?;
    Ok(f_inv * jc * f)
}

fn from_frame(f: &Mat, jf: &Mat) -> Result<Mat> {
    let f_inv = f
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("singular frame".into()))?;
    Ok(f * jf * f_inv)
}

impl GlobalJField {
    /// Field from an explicit coordinate-frame formula, e.g. a test fixture.
    /// Each value must be a `g`-orthogonal complex structure.
    pub fn from_fn(chart: &ManifoldChart, grid: Grid, f: impl Fn(&[f64]) -> Mat + Sync) -> Result<GlobalJField> {
        let d = chart.dim();
        if grid.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: grid.dim(),
            });
        }
        let values = (0..grid.len())
            .into_par_iter()
            .map(|flat| {
                let x = grid.point(flat);
                let jc = f(&x);
                let frame = orthonormal_frame(chart, &x)?;
                validate_j(&to_frame(&frame, &jc)?, 1e-8)?;
                Ok(jc.as_slice().to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        let base_point = grid.point(0);
        Ok(GlobalJField {
            chart: chart.clone(),
            base_point,
            grid,
            coordinate_j: values.concat(),
            path_independence_residual: 0.0,
            path_comparisons: 0,
        })
    }

    pub fn chart(&self) -> &ManifoldChart {
        &self.chart
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base_point
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn path_independence_residual(&self) -> f64 {
        self.path_independence_residual
    }

    pub fn path_comparisons(&self) -> usize {
        self.path_comparisons
    }

    fn slice(&self, flat: usize) -> &[f64] {
        let d2 = self.chart.dim() * self.chart.dim();
        &self.coordinate_j[flat * d2..(flat + 1) * d2]
    }

    /// Coordinate-frame matrix `J^i_j` at a grid point.
    pub fn coordinate_j(&self, flat: usize) -> Mat {
        let d = self.chart.dim();
        Mat::from_column_slice(d, d, self.slice(flat))
    }

    /// Orthonormal-frame expression at a grid point.
    pub fn j_at(&self, flat: usize) -> Result<OrthoComplexStructure> {
        let x = self.grid.point(flat);
        let frame = orthonormal_frame(&self.chart, &x)?;
        validate_j(&to_frame(&frame, &self.coordinate_j(flat))?, 1e-8)
    }

    /// Every value moved along a random tangent direction whose largest
    /// entry (orthonormal frame) is `amplitude`.
    pub fn perturbed(&self, amplitude: f64, seed: u64) -> Result<GlobalJField> {
        let values = (0..self.grid.len())
            .into_par_iter()
            .map(|flat| {
                let x = self.grid.point(flat);
                let frame = orthonormal_frame(&self.chart, &x)?;
                let j = validate_j(&to_frame(&frame, &self.coordinate_j(flat))?, 1e-8)?;
                let mut rng = seeded_rng(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(flat as u64));
                let phi = project_tangent(&j, &gaussian_matrix(j.dim(), j.dim(), &mut rng))?;
                let m = max_abs(phi.matrix());
                let moved = if m > 0.0 { exp_map(&j, &phi, amplitude / m)? } else { j };
                Ok(from_frame(&frame, moved.matrix())?.as_slice().to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GlobalJField {
            coordinate_j: values.concat(),
            ..self.clone()
        })
    }

    fn derivative(&self, flat: usize, axis: usize) -> Mat {
        let s = self.grid.stride(axis);
        (self.coordinate_j(flat + s) - self.coordinate_j(flat - s)) / (2.0 * self.grid.spacing(axis))
    }

    fn require_fine_grid(&self) -> Result<()> {
        if self.grid.res < MIN_CERTIFICATE_GRID {
            return Err(Error::GridTooCoarse {
                grid_res: self.grid.res,
            });
        }
        Ok(())
    }

    fn interior(&self) -> impl ParallelIterator<Item = usize> + '_ {
        (0..self.grid.len())
            .into_par_iter()
            .filter(|f| self.grid.is_interior(*f))
    }
}

/// Moves a coordinate-frame `J` along the straight segment `a → b` with
/// `n` RK4 steps of `dJ/ds = J·A − A·J`.
fn march(chart: &ManifoldChart, a: &[f64], b: &[f64], n: usize, mut j: Mat) -> Result<Mat> {
    let v: Vec<f64> = b.iter().zip(a).map(|(y, x)| y - x).collect();
    if v.iter().all(|c| *c == 0.0) {
        return Ok(j);
    }
    let conn = |s: f64| -> Result<Mat> {
        let x: Vec<f64> = a.iter().zip(&v).map(|(x, d)| x + s * d).collect();
        Ok(christoffel(chart, &x)?.contract(&v))
    };
    let rhs = |a: &Mat, j: &Mat| -> Mat { j * a - a * j };
    let h = 1.0 / n as f64;
    let mut a_next = conn(0.0)?;
    for k in 0..n {
        let s = k as f64 * h;
        let a0 = a_next;
        let am = conn(s + 0.5 * h)?;
        a_next = conn(s + h)?;
        let k1 = rhs(&a0, &j);
        let k2 = rhs(&am, &(&j + &k1 * (0.5 * h)));
        let k3 = rhs(&am, &(&j + &k2 * (0.5 * h)));
        let k4 = rhs(&a_next, &(&j + &k3 * h));
        j += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    Ok(j)
}

fn substeps(len: f64, spacing: f64, steps_per_spacing: usize) -> usize {
    ((steps_per_spacing as f64 * len / spacing).ceil() as usize).max(1)
}

/// Transports `J′` (orthonormal frame at `p`) to every grid point along the
/// axis-ordered polyline `p → (q₀, p₁, …) → (q₀, q₁, p₂, …) → … → q`, with
/// `steps` RK4 steps per grid spacing. Path independence is measured at
/// [`PATH_COMPARISONS`] grid points against the reversed axis order.
pub fn build_global_j(
    chart: &ManifoldChart,
    p: &[f64],
    j_prime: &OrthoComplexStructure,
    grid_res: usize,
    steps: usize,
) -> Result<GlobalJField> {
    let d = chart.dim();
    if p.len() != d || j_prime.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: if p.len() != d { p.len() } else { j_prime.dim() },
        });
    }
    if steps == 0 {
        return Err(Error::InvalidInput(
            "at least one step per grid spacing is required".into(),
        ));
    }
    if !chart.contains(p, 2.0 * FD_STEP) {
        return Err(Error::OutsideDomain { point: p.to_vec() });
    }
    let grid = Grid::central(chart, grid_res)?;
    let frame_p = orthonormal_frame(chart, p)?;
    let j_p = from_frame(&frame_p, j_prime.matrix())?;
    let res = grid.res;

    // states[flat over axes < k] with coordinates axes ≥ k still at p
    let mut states: Vec<Mat> = vec![j_p.clone()];
    for axis in 0..d {
        let h = grid.spacing(axis);
        let lines = states
            .par_iter()
            .enumerate()
            .map(|(prior, j0)| {
                let mut x: Vec<f64> = (0..d)
                    .map(|k| {
                        if k < axis {
                            grid.coord(k, (prior / grid.stride(k)) % res)
                        } else {
                            p[k]
                        }
                    })
                    .collect();
                let start = x.clone();
                let mut out = vec![Mat::zeros(d, d); res];
                let first_above = (0..res).find(|i| grid.coord(axis, *i) >= p[axis]).unwrap_or(res);
                // upward
                let mut j = j0.clone();
                x.copy_from_slice(&start);
                for (i, slot) in out.iter_mut().enumerate().skip(first_above) {
                    let mut y = x.clone();
                    y[axis] = grid.coord(axis, i);
                    j = march(chart, &x, &y, substeps((y[axis] - x[axis]).abs(), h, steps), j)?;
                    *slot = j.clone();
                    x = y;
                }
                // downward
                let mut j = j0.clone();
                x.copy_from_slice(&start);
                for i in (0..first_above).rev() {
                    let mut y = x.clone();
                    y[axis] = grid.coord(axis, i);
                    j = march(chart, &x, &y, substeps((y[axis] - x[axis]).abs(), h, steps), j)?;
                    out[i] = j.clone();
                    x = y;
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        let stride = states.len();
        let mut next = vec![Mat::zeros(0, 0); stride * res];
        for (prior, line) in lines.into_iter().enumerate() {
            for (i, j) in line.into_iter().enumerate() {
                next[i * stride + prior] = j;
            }
        }
        states = next;
    }

    // Snap each value onto the structure space in its orthonormal frame.
    let values = states
        .into_par_iter()
        .enumerate()
        .map(|(flat, jc)| {
            let x = grid.point(flat);
            let frame = orthonormal_frame(chart, &x)?;
            let snapped = OrthoComplexStructure::nearest(&to_frame(&frame, &jc)?)?;
            Ok(from_frame(&frame, snapped.matrix())?.as_slice().to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut field = GlobalJField {
        chart: chart.clone(),
        base_point: p.to_vec(),
        grid,
        coordinate_j: values.concat(),
        path_independence_residual: 0.0,
        path_comparisons: 0,
    };

    let mut rng = seeded_rng(grid_res as u64);
    let picks = sample(&mut rng, field.grid.len(), PATH_COMPARISONS.min(field.grid.len())).into_vec();
    let residuals = picks
        .par_iter()
        .map(|&flat| {
            let q = field.grid.point(flat);
            let mut x = p.to_vec();
            let mut j = j_p.clone();
            for axis in (0..d).rev() {
                let mut y = x.clone();
                y[axis] = q[axis];
                let n = substeps((y[axis] - x[axis]).abs(), field.grid.spacing(axis), steps);
                j = march(chart, &x, &y, n, j)?;
                x = y;
            }
            let frame = orthonormal_frame(chart, &q)?;
            let other = to_frame(&frame, &j)?;
            let stored = to_frame(&frame, &field.coordinate_j(flat))?;
            Ok(max_abs(&(other - stored)))
        })
        .collect::<Result<Vec<f64>>>()?;
    field.path_comparisons = residuals.len();
    field.path_independence_residual = residuals.into_iter().fold(0.0, f64::max);
    Ok(field)
}

/// `max |∂_k J^i_j + Γ^i_kl J^l_j − Γ^l_kj J^i_l|` over interior points.
pub fn covariant_constancy_check(field: &GlobalJField) -> Result<f64> {
    field.require_fine_grid()?;
    let d = field.chart.dim();
    field
        .interior()
        .map(|flat| {
            let x = field.grid.point(flat);
            let gamma = christoffel(&field.chart, &x)?;
            let j = field.coordinate_j(flat);
            let mut worst: f64 = 0.0;
            for k in 0..d {
                let dj = field.derivative(flat, k);
                for i in 0..d {
                    for jj in 0..d {
                        let mut v = dj[(i, jj)];
                        for l in 0..d {
                            v += gamma.get(i, k, l) * j[(l, jj)] - gamma.get(l, k, jj) * j[(i, l)];
                        }
                        worst = worst.max(v.abs());
                    }
                }
            }
            Ok(worst)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Largest component of the Nijenhuis tensor
/// `N^i_jl = J^k_j ∂_k J^i_l − J^k_l ∂_k J^i_j − J^i_k(∂_j J^k_l − ∂_l J^k_j)`.
pub fn nijenhuis_check(field: &GlobalJField) -> Result<f64> {
    field.require_fine_grid()?;
    let d = field.chart.dim();
    field
        .interior()
        .map(|flat| {
            let j = field.coordinate_j(flat);
            let dj: Vec<Mat> = (0..d).map(|k| field.derivative(flat, k)).collect();
            let mut worst: f64 = 0.0;
            for i in 0..d {
                for a in 0..d {
                    for b in 0..d {
                        let mut v = 0.0;
                        for k in 0..d {
                            v += j[(k, a)] * dj[k][(i, b)] - j[(k, b)] * dj[k][(i, a)];
                            v -= j[(i, k)] * (dj[a][(k, b)] - dj[b][(k, a)]);
                        }
                        worst = worst.max(v.abs());
                    }
                }
            }
            Ok(worst)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Largest component of `dω` for `ω_ij = g_ik J^k_j`, after checking that
/// `ω` is antisymmetric at every grid point.
pub fn kahler_form_check(field: &GlobalJField) -> Result<f64> {
    field.require_fine_grid()?;
    let d = field.chart.dim();
    let omega = (0..field.grid.len())
        .into_par_iter()
        .map(|flat| Ok(field.chart.metric(&field.grid.point(flat))? * field.coordinate_j(flat)))
        .collect::<Result<Vec<Mat>>>()?;
    let asym = omega
        .par_iter()
        .map(|w| max_abs(&(w + w.transpose())))
        .reduce(|| 0.0, f64::max);
    if asym > ANTISYMMETRY_TOL {
        return Err(Error::FormNotAntisymmetric { residual: asym });
    }
    let grid = &field.grid;
    let derivative = |flat: usize, axis: usize| -> Mat {
        let s = grid.stride(axis);
        (&omega[flat + s] - &omega[flat - s]) / (2.0 * grid.spacing(axis))
    };
    Ok(field
        .interior()
        .map(|flat| {
            let dw: Vec<Mat> = (0..d).map(|k| derivative(flat, k)).collect();
            let mut worst: f64 = 0.0;
            for i in 0..d {
                for j in i + 1..d {
                    for k in j + 1..d {
                        let v = dw[i][(j, k)] + dw[j][(k, i)] + dw[k][(i, j)];
                        worst = worst.max(v.abs());
                    }
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certificates {
    pub nabla_j: f64,
    pub nijenhuis: f64,
    pub d_omega: f64,
}

impl Certificates {
    pub fn compute(field: &GlobalJField) -> Result<Certificates> {
        Ok(Certificates {
            nabla_j: covariant_constancy_check(field)?,
            nijenhuis: nijenhuis_check(field)?,
            d_omega: kahler_form_check(field)?,
        })
    }

    pub fn max(&self) -> f64 {
        self.nabla_j.max(self.nijenhuis).max(self.d_omega)
    }
}
