//! The space of metric almost complex structures on a Euclidean space.
//!
//! Points are real `2n × 2n` matrices `J` with `J² = −I` and `JᵀJ = I`,
//! always written in an orthonormal basis so that adjoints are transposes.
//! The tangent space at `J` consists of skew matrices `φ` anticommuting with
//! `J`, with metric `⟨φ, ψ⟩ = tr(φψᵀ)`. The orthogonal group acts by
//! conjugation `J ↦ Q⁻¹JQ`, transitively on each of the two connected
//! components (the orientation classes) and by isometries.
//!
//! Geodesics are the orbits `t ↦ e^{tX} J e^{−tX}` of one-parameter
//! subgroups generated by skew `X` anticommuting with `J`; the tangent vector
//! of such a curve at `t = 0` is `φ = 2XJ`.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{
    frobenius_inner, gaussian_matrix, log_special_orthogonal, max_abs, orthogonality_residual, pfaffian,
    random_special_orthogonal, rotation_angles, seeded_rng, skew_part, Mat,
};
use crate::matrix_json::MatrixJson;

/// Tolerance for the algebraic invariants `J² = −I`, `JᵀJ = I`, anticommutation.
pub const TOL_ALG: f64 = 1e-10;
/// Tolerance for logarithm round-trips.
pub const TOL_LOG: f64 = 1e-8;
/// Below this value of `1 + min cos θ` the principal logarithm is treated as
/// undefined.
const CUT_MARGIN: f64 = 1e-12;

/// A point of the space: an orthogonal complex structure.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoComplexStructure {
    mat: Mat,
}

impl OrthoComplexStructure {
    pub(crate) fn from_matrix_unchecked(mat: Mat) -> Self {
        OrthoComplexStructure { mat }
    }

    /// Real dimension `2n`.
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Complex dimension `n`.
    pub fn n(&self) -> usize {
        self.mat.nrows() / 2
    }

    pub fn matrix(&self) -> &Mat {
        &self.mat
    }

    pub fn into_matrix(self) -> Mat {
        self.mat
    }

    /// `+1` for the component of [`canonical_j`], `−1` for the other one.
    pub fn orientation(&self) -> i8 {
        let sign = if self.n().is_multiple_of(2) { 1.0 } else { -1.0 };
        if pfaffian(&self.mat) * sign > 0.0 {
            1
        } else {
            -1
        }
    }

    /// Max-abs entry distance between the two matrices.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        max_abs(&(&self.mat - &other.mat))
    }

    /// Nearest orthogonal complex structure to a matrix close to one: the
    /// skew part `A` is replaced by `A (AᵀA)^{-1/2}`.
    pub fn nearest(mat: &Mat) -> Result<Self> {
        check_even_square(mat)?;
        let a = skew_part(mat);
        let eig = SymmetricEigen::new(a.transpose() * &a);
        if eig.eigenvalues.iter().any(|&l| !(l > 1e-12)) {
            return Err(Error::NotAComplexStructure {
                residual: max_abs(&(mat * mat + Mat::identity(mat.nrows(), mat.nrows()))),
            });
        }
        let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
        let p = &eig.eigenvectors * Mat::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
        Ok(OrthoComplexStructure::from_matrix_unchecked(skew_part(&(a * p))))
    }
}

impl Serialize for OrthoComplexStructure {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from_matrix(&self.mat).serialize(s)
    }
}

impl<'de> Deserialize<'de> for OrthoComplexStructure {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let mj = MatrixJson::deserialize(d)?;
        let m = mj.to_matrix().map_err(serde::de::Error::custom)?;
        validate_j(&m, TOL_ALG).map_err(serde::de::Error::custom)
    }
}

/// A tangent vector `φ` at `base`: skew and anticommuting with `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentPhi {
    base: OrthoComplexStructure,
    mat: Mat,
}

impl TangentPhi {
    pub fn new(base: OrthoComplexStructure, mat: Mat) -> Result<Self> {
        if mat.nrows() != base.dim() || mat.ncols() != base.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                found: mat.nrows(),
            });
        }
        let skew = max_abs(&(&mat + mat.transpose()));
        let anti = max_abs(&(&mat * base.matrix() + base.matrix() * &mat));
        if skew > TOL_ALG || anti > TOL_ALG {
            return Err(Error::InvalidInput(format!(
                "not a tangent vector: skew defect {skew:.3e}, anticommutation defect {anti:.3e}"
            )));
        }
        Ok(TangentPhi { base, mat })
    }

    pub(crate) fn new_unchecked(base: OrthoComplexStructure, mat: Mat) -> Self {
        TangentPhi { base, mat }
    }

    pub fn zero(base: &OrthoComplexStructure) -> Self {
        let d = base.dim();
        TangentPhi {
            base: base.clone(),
            mat: Mat::zeros(d, d),
        }
    }

    pub fn base(&self) -> &OrthoComplexStructure {
        &self.base
    }

    pub fn matrix(&self) -> &Mat {
        &self.mat
    }

    pub fn norm(&self) -> f64 {
        self.mat.norm()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        TangentPhi {
            base: self.base.clone(),
            mat: &self.mat * factor,
        }
    }

    /// Sum of two tangents at the same base point.
    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same_base(&self.base, &other.base)?;
        Ok(TangentPhi {
            base: self.base.clone(),
            mat: &self.mat + &other.mat,
        })
    }

    pub fn to_lie_direction(&self) -> LieDirection {
        LieDirection {
            base: self.base.clone(),
            mat: -(&self.mat * self.base.matrix()) * 0.5,
        }
    }
}

/// Generator `X` of the geodesic through `base`, related to the tangent by
/// `φ = 2XJ` and `X = −φJ/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieDirection {
    base: OrthoComplexStructure,
    mat: Mat,
}

impl LieDirection {
    pub fn base(&self) -> &OrthoComplexStructure {
        &self.base
    }

    pub fn matrix(&self) -> &Mat {
        &self.mat
    }

    pub fn to_tangent(&self) -> TangentPhi {
        TangentPhi {
            base: self.base.clone(),
            mat: &self.mat * self.base.matrix() * 2.0,
        }
    }
}

fn check_even_square(mat: &Mat) -> Result<()> {
    if mat.nrows() != mat.ncols() {
        return Err(Error::NotSquare {
            rows: mat.nrows(),
            cols: mat.ncols(),
        });
    }
    if mat.nrows() == 0 {
        return Err(Error::ZeroDimension);
    }
    if mat.nrows() % 2 == 1 {
        return Err(Error::OddDimension { dim: mat.nrows() });
    }
    Ok(())
}

fn check_same_base(a: &OrthoComplexStructure, b: &OrthoComplexStructure) -> Result<()> {
    if a.dim() != b.dim() || a.max_abs_diff(b) > TOL_ALG {
        return Err(Error::BasePointMismatch);
    }
    Ok(())
}

fn check_same_dim(a: &OrthoComplexStructure, b: &OrthoComplexStructure) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Block-diagonal `J₀` with `n` blocks `[[0, −1], [1, 0]]`.
pub fn canonical_j(n: usize) -> Result<OrthoComplexStructure> {
    if n == 0 {
        return Err(Error::ZeroDimension);
    }
    let mut m = Mat::zeros(2 * n, 2 * n);
    for k in 0..n {
        m[(2 * k, 2 * k + 1)] = -1.0;
        m[(2 * k + 1, 2 * k)] = 1.0;
    }
    Ok(OrthoComplexStructure::from_matrix_unchecked(m))
}

/// Checks both invariants within `tol` and wraps the matrix unchanged.
pub fn validate_j(mat: &Mat, tol: f64) -> Result<OrthoComplexStructure> {
    check_even_square(mat)?;
    let d = mat.nrows();
    let id = Mat::identity(d, d);
    let square = max_abs(&(mat * mat + &id));
    if square > tol {
        return Err(Error::NotAComplexStructure { residual: square });
    }
    let orth = orthogonality_residual(mat).max(max_abs(&(mat + mat.transpose())));
    if orth > tol {
        return Err(Error::NotOrthogonal { residual: orth });
    }
    Ok(OrthoComplexStructure::from_matrix_unchecked(mat.clone()))
}

/// `tr(φψᵀ)`.
pub fn metric_inner(phi: &TangentPhi, psi: &TangentPhi) -> Result<f64> {
    check_same_base(&phi.base, &psi.base)?;
    Ok(frobenius_inner(&phi.mat, &psi.mat))
}

/// Frobenius-orthogonal projection of an arbitrary matrix onto `T_J`:
/// `φ = (S + JSJ)/2` with `S` the skew part of `a`.
pub fn project_tangent(j: &OrthoComplexStructure, a: &Mat) -> Result<TangentPhi> {
    if a.nrows() != j.dim() || a.ncols() != j.dim() {
        return Err(Error::DimensionMismatch {
            expected: j.dim(),
            found: a.nrows(),
        });
    }
    let s = skew_part(a);
    let jm = j.matrix();
    let phi = (&s + jm * &s * jm) * 0.5;
    Ok(TangentPhi::new_unchecked(j.clone(), phi))
}

/// `e^{tX} J e^{−tX}` with `X = −φJ/2`, which equals `e^{−tφJ} J`. The
/// conjugation form keeps round-off from compounding over repeated steps.
pub fn exp_map(j: &OrthoComplexStructure, phi: &TangentPhi, t: f64) -> Result<OrthoComplexStructure> {
    check_same_base(j, &phi.base)?;
    let generator = skew_part(&(phi.matrix() * j.matrix() * (-0.5 * t)));
    let rotation = generator.exp();
    let moved = &rotation * j.matrix() * rotation.transpose();
    Ok(OrthoComplexStructure::from_matrix_unchecked(skew_part(&moved)))
}

/// Inverse of [`exp_map`] inside the injectivity radius.
///
/// Computes `X = ½ log(J2·J1⁻¹)` with the principal logarithm and verifies
/// that `X` anticommutes with `J1` and that `e^X J1 e^{−X}` reproduces `J2`.
pub fn log_map(j1: &OrthoComplexStructure, j2: &OrthoComplexStructure) -> Result<TangentPhi> {
    check_same_dim(j1, j2)?;
    if j1.orientation() != j2.orientation() {
        return Err(Error::ComponentMismatch {
            detail: "the structures induce opposite orientations".into(),
        });
    }
    let r = -(j2.matrix() * j1.matrix());
    let (log, margin) = log_special_orthogonal(&r);
    if margin < CUT_MARGIN {
        return Err(Error::CutLocus { margin });
    }
    let x = &log * 0.5;
    let anti = max_abs(&(&x * j1.matrix() + j1.matrix() * &x));
    let round_trip = max_abs(&(log.exp() * j1.matrix() - j2.matrix()));
    if anti > TOL_LOG || round_trip > TOL_LOG {
        if margin < 1e-6 {
            return Err(Error::CutLocus { margin });
        }
        return Err(Error::ComponentMismatch {
            detail: format!(
                "no anticommuting generator reproduces the target (anticommutation {anti:.3e}, round trip {round_trip:.3e})"
            ),
        });
    }
    Ok(TangentPhi::new_unchecked(j1.clone(), log * j1.matrix()))
}

/// Geodesic distance `‖log_map(J1, J2)‖ = 2‖X‖_F`.
pub fn distance(j1: &OrthoComplexStructure, j2: &OrthoComplexStructure) -> Result<f64> {
    Ok(log_map(j1, j2)?.norm())
}

/// Distance from the rotation angles of `J2·J1⁻¹` alone, `√(Σ θᵢ²)`.
///
/// Agrees with [`distance`] wherever the latter is defined and stays finite
/// on the cut locus, where every minimizing geodesic has this length.
pub fn eigenangle_distance(j1: &OrthoComplexStructure, j2: &OrthoComplexStructure) -> Result<f64> {
    check_same_dim(j1, j2)?;
    if j1.orientation() != j2.orientation() {
        return Err(Error::ComponentMismatch {
            detail: "the structures induce opposite orientations".into(),
        });
    }
    let r = -(j2.matrix() * j1.matrix());
    Ok(rotation_angles(&r).iter().map(|t| t * t).sum::<f64>().sqrt())
}

/// `Q⁻¹ J Q`, the single conjugation convention used throughout.
pub fn conjugate(q: &Mat, j: &OrthoComplexStructure) -> Result<OrthoComplexStructure> {
    if q.nrows() != j.dim() || q.ncols() != j.dim() {
        return Err(Error::DimensionMismatch {
            expected: j.dim(),
            found: q.nrows(),
        });
    }
    let residual = orthogonality_residual(q);
    if residual > TOL_ALG {
        return Err(Error::NotOrthogonalGroupElement { residual });
    }
    Ok(OrthoComplexStructure::from_matrix_unchecked(
        q.transpose() * j.matrix() * q,
    ))
}

/// Pushes a tangent at `J` forward to the tangent `Q⁻¹φQ` at `Q⁻¹JQ`.
pub fn conjugate_tangent(q: &Mat, phi: &TangentPhi) -> Result<TangentPhi> {
    let base = conjugate(q, &phi.base)?;
    Ok(TangentPhi::new_unchecked(base, q.transpose() * phi.matrix() * q))
}

/// Sectional curvature of the plane spanned by `φ, ψ`.
///
/// With generators `X = −φJ/2`, `Y = −ψJ/2` and the invariant form
/// `Q = 4·⟨·,·⟩_F`, the symmetric-space formula gives
/// `Q([X,Y],[X,Y]) / (Q(X,X)Q(Y,Y) − Q(X,Y)²)`.
pub fn sectional_curvature(j: &OrthoComplexStructure, phi: &TangentPhi, psi: &TangentPhi) -> Result<f64> {
    check_same_base(j, &phi.base)?;
    check_same_base(j, &psi.base)?;
    let gram = metric_inner(phi, phi)? * metric_inner(psi, psi)? - metric_inner(phi, psi)?.powi(2);
    if gram < 1e-14 {
        return Err(Error::DegeneratePlane { gram });
    }
    let x = phi.to_lie_direction().mat;
    let y = psi.to_lie_direction().mat;
    let bracket = &x * &y - &y * &x;
    Ok(4.0 * frobenius_inner(&bracket, &bracket) / gram)
}

/// `canonical_j(n)` conjugated by a seeded Haar-random special orthogonal matrix.
pub fn random_j(n: usize, seed: u64) -> Result<OrthoComplexStructure> {
    let j0 = canonical_j(n)?;
    let mut rng = seeded_rng(seed);
    let q = random_special_orthogonal(2 * n, &mut rng);
    Ok(OrthoComplexStructure::from_matrix_unchecked(
        &q * j0.matrix() * q.transpose(),
    ))
}

/// Seeded random tangent of g̃-norm exactly `norm`.
pub fn random_tangent(j: &OrthoComplexStructure, seed: u64, norm: f64) -> Result<TangentPhi> {
    if !(norm > 0.0) {
        return Err(Error::InvalidInput(format!(
            "tangent norm must be positive, got {norm}"
        )));
    }
    for attempt in 0..8u64 {
        let mut rng = seeded_rng(seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        let a = gaussian_matrix(j.dim(), j.dim(), &mut rng);
        let phi = project_tangent(j, &a)?;
        let len = phi.norm();
        if len > 1e-12 {
            return Ok(phi.scaled(norm / len));
        }
    }
    Err(Error::ZeroProjection)
}

/// A g̃-orthonormal basis of `T_J`, of size `n(n − 1)`.
pub fn tangent_basis(j: &OrthoComplexStructure) -> Vec<TangentPhi> {
    let d = j.dim();
    let mut basis: Vec<Mat> = Vec::new();
    for a in 0..d {
        for b in a + 1..d {
            let mut e = Mat::zeros(d, d);
            e[(a, b)] = 1.0;
            e[(b, a)] = -1.0;
            let mut v = project_tangent(j, &e).expect("square").mat;
            for u in &basis {
                let c = frobenius_inner(&v, u);
                v -= u * c;
            }
            let len = v.norm();
            if len > 1e-8 {
                basis.push(v / len);
            }
        }
    }
    basis
        .into_iter()
        .map(|m| TangentPhi::new_unchecked(j.clone(), m))
        .collect()
}

/// An orthonormal basis `(v₁, Jv₁, v₂, Jv₂, …)` as the columns of `B`, so
/// that `J = B J₀ Bᵀ`.
pub fn adapted_basis(j: &OrthoComplexStructure) -> Mat {
    let d = j.dim();
    let jm = j.matrix();
    let mut cols: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(d);
    for k in 0..d {
        if cols.len() == d {
            break;
        }
        let mut v = nalgebra::DVector::<f64>::zeros(d);
        v[k] = 1.0;
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dot(&v);
                v -= c * proj;
            }
        }
        let len = v.norm();
        if len < 1e-6 {
            continue;
        }
        let v = v / len;
        let jv = jm * &v;
        cols.push(v);
        cols.push(jv);
    }
    Mat::from_columns(&cols)
}

/// An orthogonal `Q` with `conjugate(Q, j1) = j2`, built from adapted bases.
/// `Q` is special orthogonal exactly when the two structures share a component.
pub fn conjugator(j1: &OrthoComplexStructure, j2: &OrthoComplexStructure) -> Result<Mat> {
    check_same_dim(j1, j2)?;
    Ok(adapted_basis(j1) * adapted_basis(j2).transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j(n: usize) -> OrthoComplexStructure {
        canonical_j(n).unwrap()
    }

    #[test]
    fn canonical_plane_structure() {
        let m = j(1).into_matrix();
        assert_eq!(m, Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
    }

    #[test]
    fn canonical_is_direct_sum_of_blocks() {
        let m = j(2).into_matrix();
        let expected = Mat::from_row_slice(
            4,
            4,
            &[
                0.0, -1.0, 0.0, 0.0, //
                1.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, -1.0, //
                0.0, 0.0, 1.0, 0.0,
            ],
        );
        assert_eq!(m, expected);
    }

    #[test]
    fn canonical_squares_to_minus_identity() {
        for n in 1..=4 {
            let m = j(n).into_matrix();
            assert_eq!(&m * &m, -Mat::identity(2 * n, 2 * n));
            assert_eq!(m.transpose() * &m, Mat::identity(2 * n, 2 * n));
        }
    }

    #[test]
    fn zero_complex_dimension_is_rejected() {
        assert_eq!(canonical_j(0), Err(Error::ZeroDimension));
    }

    #[test]
    fn identity_is_not_a_complex_structure() {
        let err = validate_j(&Mat::identity(4, 4), TOL_ALG).unwrap_err();
        assert!(matches!(err, Error::NotAComplexStructure { .. }));
    }

    #[test]
    fn validate_accepts_canonical_and_keeps_matrix() {
        let m = j(2).into_matrix();
        assert_eq!(validate_j(&m, TOL_ALG).unwrap().matrix(), &m);
    }

    #[test]
    fn validate_rejects_broken_entry() {
        let mut m = j(2).into_matrix();
        m[(0, 1)] = -0.9;
        let err = validate_j(&m, TOL_ALG).unwrap_err();
        assert!(matches!(
            err,
            Error::NotOrthogonal { .. } | Error::NotAComplexStructure { .. }
        ));
    }

    #[test]
    fn validate_rejects_odd_and_non_square() {
        assert!(matches!(
            validate_j(&Mat::zeros(3, 3), TOL_ALG),
            Err(Error::OddDimension { dim: 3 })
        ));
        assert!(matches!(
            validate_j(&Mat::zeros(2, 4), TOL_ALG),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn validate_distinguishes_non_orthogonal_square_root() {
        // J² = −I but JᵀJ ≠ I: a sheared complex structure.
        let s = Mat::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0]);
        let m = &s * j(1).matrix() * s.clone().try_inverse().unwrap();
        assert!(matches!(validate_j(&m, TOL_ALG), Err(Error::NotOrthogonal { .. })));
    }

    #[test]
    fn metric_of_zero_tangent_vanishes() {
        let z = TangentPhi::zero(&j(2));
        assert_eq!(metric_inner(&z, &z).unwrap(), 0.0);
    }

    #[test]
    fn metric_is_positive_definite_on_random_tangents() {
        let base = random_j(3, 4).unwrap();
        for seed in 0..100 {
            let mut rng = seeded_rng(seed);
            let phi = project_tangent(&base, &gaussian_matrix(6, 6, &mut rng)).unwrap();
            let q = metric_inner(&phi, &phi).unwrap();
            assert!(q > 0.0);
        }
    }

    #[test]
    fn metric_rejects_mismatched_bases() {
        let a = TangentPhi::zero(&j(2));
        let b = TangentPhi::zero(&random_j(2, 1).unwrap());
        assert_eq!(metric_inner(&a, &b), Err(Error::BasePointMismatch));
    }

    #[test]
    fn metric_equals_four_times_generator_norm() {
        // Single plane-rotation generator: X = E₀₂ − E₂₀ − (E₁₃ − E₃₁) anticommutes with J₀.
        let base = j(2);
        let mut x = Mat::zeros(4, 4);
        x[(0, 2)] = 1.0;
        x[(2, 0)] = -1.0;
        x[(1, 3)] = -1.0;
        x[(3, 1)] = 1.0;
        x /= x.norm();
        assert!(max_abs(&(&x * base.matrix() + base.matrix() * &x)) < 1e-15);
        let phi = TangentPhi::new(base.clone(), &x * base.matrix() * 2.0).unwrap();
        let q = metric_inner(&phi, &phi).unwrap();
        assert!((q - 4.0 * x.norm_squared()).abs() < 1e-12);
        assert!((q - 4.0).abs() < 1e-12);
    }

    #[test]
    fn projection_is_idempotent() {
        let base = random_j(2, 8).unwrap();
        let phi = random_tangent(&base, 3, 0.7).unwrap();
        let again = project_tangent(&base, phi.matrix()).unwrap();
        assert!(max_abs(&(again.matrix() - phi.matrix())) < TOL_ALG);
    }

    #[test]
    fn projection_of_j_vanishes() {
        let base = random_j(3, 2).unwrap();
        let phi = project_tangent(&base, base.matrix()).unwrap();
        assert!(max_abs(phi.matrix()) < TOL_ALG);
    }

    #[test]
    fn projection_residual_is_orthogonal_to_tangent_space() {
        let base = random_j(2, 21).unwrap();
        let mut rng = seeded_rng(77);
        let a = gaussian_matrix(4, 4, &mut rng);
        let phi = project_tangent(&base, &a).unwrap();
        let residual = &a - phi.matrix();
        for seed in 0..20 {
            let psi = random_tangent(&base, 100 + seed, 1.0).unwrap();
            assert!(frobenius_inner(&residual, psi.matrix()).abs() < 1e-12);
        }
    }

    #[test]
    fn exp_at_zero_time_or_zero_vector_is_identity() {
        let base = random_j(2, 5).unwrap();
        let phi = random_tangent(&base, 6, 1.3).unwrap();
        assert!(exp_map(&base, &phi, 0.0).unwrap().max_abs_diff(&base) < 1e-15);
        let zero = TangentPhi::zero(&base);
        assert!(exp_map(&base, &zero, 2.5).unwrap().max_abs_diff(&base) < 1e-15);
    }

    #[test]
    fn exp_rejects_foreign_tangent() {
        let phi = random_tangent(&random_j(2, 1).unwrap(), 2, 1.0).unwrap();
        assert_eq!(exp_map(&j(2), &phi, 1.0), Err(Error::BasePointMismatch));
    }

    #[test]
    fn exp_output_is_a_structure() {
        for n in 1..=3 {
            for seed in 0..200u64 {
                let base = random_j(n, seed).unwrap();
                let out = match random_tangent(&base, seed + 1000, 0.1 + (seed % 17) as f64 * 0.3) {
                    Ok(phi) => exp_map(&base, &phi, 1.0).unwrap(),
                    Err(Error::ZeroProjection) => {
                        assert_eq!(n, 1);
                        base.clone()
                    }
                    Err(e) => panic!("{e}"),
                };
                validate_j(out.matrix(), TOL_ALG).unwrap();
            }
        }
    }

    #[test]
    fn exp_travels_unit_speed() {
        let base = j(2);
        for seed in 0..10 {
            let phi = random_tangent(&base, seed, 1.0).unwrap();
            for t in [0.1, 0.3] {
                let d = distance(&base, &exp_map(&base, &phi, t).unwrap()).unwrap();
                assert!((d - t).abs() < 1e-8, "{d} vs {t}");
            }
        }
    }

    #[test]
    fn log_of_same_point_is_zero() {
        let base = random_j(3, 9).unwrap();
        assert!(log_map(&base, &base).unwrap().norm() < 1e-14);
    }

    #[test]
    fn log_recovers_tangent() {
        let j1 = random_j(2, 42).unwrap();
        let phi = random_tangent(&j1, 43, 0.4).unwrap();
        let j2 = exp_map(&j1, &phi, 1.0).unwrap();
        let back = log_map(&j1, &j2).unwrap();
        assert!(max_abs(&(back.matrix() - phi.matrix())) < 1e-9);
    }

    #[test]
    fn opposite_orientation_is_a_component_mismatch() {
        let j1 = j(2);
        let mut reflection = Mat::identity(4, 4);
        reflection[(1, 1)] = -1.0;
        let j2 = OrthoComplexStructure::from_matrix_unchecked(&reflection * j1.matrix() * &reflection);
        validate_j(j2.matrix(), TOL_ALG).unwrap();
        assert!(matches!(log_map(&j1, &j2), Err(Error::ComponentMismatch { .. })));
        assert!(matches!(distance(&j1, &j2), Err(Error::ComponentMismatch { .. })));
    }

    #[test]
    fn antipodal_structure_is_on_the_cut_locus() {
        // For n = 2, −J lies in the same component at distance 2π.
        let j1 = j(2);
        let j2 = OrthoComplexStructure::from_matrix_unchecked(-j1.matrix());
        assert!(matches!(log_map(&j1, &j2), Err(Error::CutLocus { .. })));
        let d = eigenangle_distance(&j1, &j2).unwrap();
        assert!((d - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn plane_structures_have_no_tangent_directions() {
        let base = j(1);
        assert_eq!(random_tangent(&base, 0, 1.0), Err(Error::ZeroProjection));
        let mut rng = seeded_rng(1);
        for _ in 0..50 {
            let phi = project_tangent(&base, &gaussian_matrix(2, 2, &mut rng)).unwrap();
            assert!(max_abs(phi.matrix()) < 1e-15);
        }
        assert!(tangent_basis(&base).is_empty());
    }

    #[test]
    fn distance_is_zero_on_diagonal_and_symmetric() {
        let mut checked = 0;
        for seed in 0..50 {
            let a = random_j(2, 2 * seed).unwrap();
            let b = exp_map(&a, &random_tangent(&a, seed, 1.0 + 0.02 * seed as f64).unwrap(), 1.0).unwrap();
            assert!(distance(&a, &a).unwrap() < 1e-14);
            let dab = distance(&a, &b).unwrap();
            let dba = distance(&b, &a).unwrap();
            assert!((dab - dba).abs() < 1e-10);
            checked += 1;
        }
        assert_eq!(checked, 50);
    }

    #[test]
    fn conjugation_by_identity_and_by_j() {
        let base = random_j(3, 12).unwrap();
        let id = Mat::identity(6, 6);
        assert!(conjugate(&id, &base).unwrap().max_abs_diff(&base) < 1e-15);
        assert!(conjugate(base.matrix(), &base).unwrap().max_abs_diff(&base) < 1e-14);
    }

    #[test]
    fn conjugation_rejects_non_orthogonal() {
        let q = Mat::identity(4, 4) * 1.01;
        assert!(matches!(
            conjugate(&q, &j(2)),
            Err(Error::NotOrthogonalGroupElement { .. })
        ));
    }

    fn block_generator(dim: usize, first: usize, second: usize) -> Mat {
        // Mixes complex lines `first` and `second` of J₀; anticommutes with J₀.
        let (a, b) = (2 * first, 2 * second);
        let mut x = Mat::zeros(dim, dim);
        x[(a, b)] = 1.0;
        x[(b, a)] = -1.0;
        x[(a + 1, b + 1)] = -1.0;
        x[(b + 1, a + 1)] = 1.0;
        x
    }

    #[test]
    fn commuting_generators_span_flat_plane() {
        let base = j(4);
        let x = block_generator(8, 0, 1);
        let y = block_generator(8, 2, 3);
        assert!(max_abs(&(&x * &y - &y * &x)) == 0.0);
        let phi = TangentPhi::new(base.clone(), &x * base.matrix() * 2.0).unwrap();
        let psi = TangentPhi::new(base.clone(), &y * base.matrix() * 2.0).unwrap();
        assert_eq!(sectional_curvature(&base, &phi, &psi).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_plane_is_rejected() {
        let base = j(2);
        let phi = random_tangent(&base, 1, 1.0).unwrap();
        assert!(matches!(
            sectional_curvature(&base, &phi, &phi.scaled(2.0)),
            Err(Error::DegeneratePlane { .. })
        ));
    }

    #[test]
    fn random_structures_are_valid_and_deterministic() {
        for n in 1..=3 {
            for seed in 0..100 {
                let a = random_j(n, seed).unwrap();
                validate_j(a.matrix(), TOL_ALG).unwrap();
                assert_eq!(a, random_j(n, seed).unwrap());
                assert_eq!(a.orientation(), 1);
            }
        }
    }

    #[test]
    fn distinct_seeds_give_distinct_points() {
        let mut collisions = 0;
        for seed in 0..100 {
            let a = random_j(2, seed).unwrap();
            let b = random_j(2, seed + 1000).unwrap();
            if eigenangle_distance(&a, &b).unwrap() <= 0.0 {
                collisions += 1;
            }
        }
        assert_eq!(collisions, 0);
    }

    #[test]
    fn random_tangent_has_requested_norm() {
        let base = random_j(3, 1).unwrap();
        for seed in 0..100 {
            let phi = random_tangent(&base, seed, 0.37).unwrap();
            assert!((phi.norm() - 0.37).abs() < 1e-12);
            TangentPhi::new(base.clone(), phi.matrix().clone()).unwrap();
        }
    }

    #[test]
    fn tangent_basis_has_expected_size_and_is_orthonormal() {
        for n in 2..=4 {
            let base = random_j(n, n as u64).unwrap();
            let basis = tangent_basis(&base);
            assert_eq!(basis.len(), n * (n - 1));
            for (a, u) in basis.iter().enumerate() {
                for (b, v) in basis.iter().enumerate() {
                    let expected = if a == b { 1.0 } else { 0.0 };
                    assert!((metric_inner(u, v).unwrap() - expected).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn lie_direction_round_trips() {
        let base = random_j(2, 3).unwrap();
        let phi = random_tangent(&base, 4, 1.0).unwrap();
        let x = phi.to_lie_direction();
        assert!(max_abs(&(x.matrix() + x.matrix().transpose())) < 1e-14);
        assert!(max_abs(&(x.matrix() * base.matrix() + base.matrix() * x.matrix())) < 1e-14);
        assert!(max_abs(&(x.to_tangent().matrix() - phi.matrix())) < 1e-14);
    }

    #[test]
    fn nearest_snaps_perturbed_structure() {
        let base = random_j(2, 17).unwrap();
        let mut rng = seeded_rng(2);
        let noisy = base.matrix() + gaussian_matrix(4, 4, &mut rng) * 1e-6;
        let snapped = OrthoComplexStructure::nearest(&noisy).unwrap();
        validate_j(snapped.matrix(), 1e-13).unwrap();
        assert!(snapped.max_abs_diff(&base) < 1e-5);
    }

    #[test]
    fn serde_round_trip_validates() {
        let a = random_j(2, 1).unwrap();
        let text = serde_json::to_string(&a).unwrap();
        let back: OrthoComplexStructure = serde_json::from_str(&text).unwrap();
        assert_eq!(a, back);
        let bad = r#"{"dim":2,"rows":[[1,0],[0,1]]}"#;
        assert!(serde_json::from_str::<OrthoComplexStructure>(bad).is_err());
    }
}
